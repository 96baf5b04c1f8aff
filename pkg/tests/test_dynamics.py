"""Systems, companions, metrics, and invariant sampling."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dltlab.dynamics import (
    TorusPoint,
    apply_companion,
    apply_map,
    companion_batch,
    contraction_profile,
    distance,
    identity_companion,
    sample_batch,
    sample_measure,
    stable_direction,
    stable_translation,
    step_batch,
    torus_automorphism,
    torus_translation,
    translation_companion,
    two_sided_shift,
)
from dltlab.errors import ConfigurationError, DomainError
from dltlab.streams import Stream

CAT = [[2, 1], [1, 1]]


# ---------------------------------------------------------------------------
# construction and validation


def test_torus_automorphism_requires_unimodular():
    with pytest.raises(ConfigurationError):
        torus_automorphism([[2, 0], [0, 1]])  # det 2
    torus_automorphism([[0, 1], [1, 0]])  # det -1 is fine


def test_torus_automorphism_requires_integer_entries():
    with pytest.raises(ConfigurationError):
        torus_automorphism([[2.0, 1.0], [1.0, 1.5]])


def test_shift_weights_validation():
    with pytest.raises(ConfigurationError):
        two_sided_shift([0.5, 0.6])
    with pytest.raises(ConfigurationError):
        two_sided_shift([1.0])
    with pytest.raises(ConfigurationError):
        two_sided_shift([1.2, -0.2])


def test_translation_vector_reduced_mod_1():
    sys = torus_translation([1.25, -0.5])
    x = apply_map(sys, TorusPoint((0.0, 0.0)))
    assert x.coords == (0.25, 0.5)


# ---------------------------------------------------------------------------
# orbits against exact rational arithmetic


def test_cat_orbit_matches_exact_rationals():
    # hyperbolicity amplifies the representation error of 1/5 by ~|A|^n
    sys = torus_automorphism(CAT)
    p = (Fraction(1, 5), Fraction(2, 5))
    x = TorusPoint((float(p[0]), float(p[1])))
    for _ in range(12):
        p = ((2 * p[0] + p[1]) % 1, (p[0] + p[1]) % 1)
        x = apply_map(sys, x)
        assert x.coords == pytest.approx((float(p[0]), float(p[1])), abs=1e-10)


def test_cat_orbit_exact_on_dyadic_rationals():
    # dyadic coordinates stay on a fixed 2^-3 grid, so floats are exact
    sys = torus_automorphism(CAT)
    p = (Fraction(1, 8), Fraction(3, 8))
    x = TorusPoint((float(p[0]), float(p[1])))
    for _ in range(40):
        p = ((2 * p[0] + p[1]) % 1, (p[0] + p[1]) % 1)
        x = apply_map(sys, x)
        assert x.coords == (float(p[0]), float(p[1]))


def test_cat_inverse_is_exact_on_rationals():
    sys = torus_automorphism(CAT)
    x = TorusPoint((0.2, 0.4))
    back = apply_map(sys, apply_map(sys, x, 7), -7)
    assert back.coords == pytest.approx(x.coords, abs=1e-12)


def test_fixed_point_at_origin():
    sys = torus_automorphism(CAT)
    x = apply_map(sys, TorusPoint((0.0, 0.0)), 5)
    assert x.coords == (0.0, 0.0)


@given(st.integers(min_value=0, max_value=30))
@settings(max_examples=30, deadline=None)
def test_shift_step_moves_the_window(n):
    sys = two_sided_shift([0.5, 0.5])
    x = sample_measure(sys, Stream(8).child("pts"), 3)
    y = apply_map(sys, x, n)
    np.testing.assert_array_equal(
        x.coordinates(n, n + 10), y.coordinates(0, 10)
    )


def test_shift_inverse_round_trip():
    sys = two_sided_shift([0.3, 0.7])
    x = sample_measure(sys, Stream(8).child("pts"), 0)
    y = apply_map(sys, apply_map(sys, x, -4), 4)
    np.testing.assert_array_equal(x.coordinates(-5, 5), y.coordinates(-5, 5))


def test_rotation_orbit_exact():
    sys = torus_translation([0.125])
    x = TorusPoint((0.5,))
    y = apply_map(sys, x, 12)  # 12/8 = 1.5 turns
    assert y.coords == (0.0,)


# ---------------------------------------------------------------------------
# metric


def test_torus_metric_wraps():
    sys = torus_automorphism(CAT)
    a, b = TorusPoint((0.95, 0.0)), TorusPoint((0.05, 0.0))
    assert distance(sys, a, b) == pytest.approx(0.1, abs=1e-12)


def test_torus_metric_symmetry_and_zero():
    sys = torus_automorphism(CAT)
    a, b = TorusPoint((0.1, 0.7)), TorusPoint((0.8, 0.2))
    assert distance(sys, a, b) == pytest.approx(distance(sys, b, a), abs=0)
    assert distance(sys, a, a) == 0.0


def test_shift_metric_decays_with_agreement():
    sys = two_sided_shift([0.5, 0.5])
    s = Stream(99).child("m")
    x, y = sample_measure(sys, s, 0), sample_measure(sys, s, 1)
    # distances shrink as the common central block grows
    d_xy = distance(sys, x, y)
    assert 0.0 <= d_xy <= 1.0
    assert distance(sys, x, x) == 0.0


# ---------------------------------------------------------------------------
# invariant sampling


def test_torus_sampling_is_uniform():
    sys = torus_automorphism(CAT)
    batch = sample_batch(sys, Stream(4).child("unif"), 0, 20000)
    coords = batch.coords
    assert coords.shape == (20000, 2)
    assert abs(coords[:, 0].mean() - 0.5) < 0.01
    # invariance: pushing the sample forward keeps box masses
    inside_before = np.mean((coords[:, 0] < 0.5))
    step_batch(batch, 3)
    inside_after = np.mean((batch.coords[:, 0] < 0.5))
    assert abs(inside_before - inside_after) < 0.02


def test_shift_sampling_matches_weights():
    sys = two_sided_shift([0.2, 0.8])
    batch = sample_batch(sys, Stream(4).child("sym"), 0, 20000)
    symbols = batch.symbol_block(0, 1)[:, 0]
    assert abs(np.mean(symbols == 0) - 0.2) < 0.02


def test_sample_batch_agrees_with_sample_measure():
    sys = torus_automorphism(CAT)
    stream = Stream(21).child("pts")
    batch = sample_batch(sys, stream, 5, 3)
    for i in range(3):
        single = sample_measure(sys, stream, 5 + i)
        assert batch.point(i).coords == single.coords


def test_batch_step_matches_pointwise_map():
    sys = torus_automorphism(CAT)
    batch = sample_batch(sys, Stream(13).child("pw"), 0, 8)
    singles = [batch.point(i) for i in range(8)]
    step_batch(batch, 4)
    for i, x in enumerate(singles):
        assert batch.point(i).coords == pytest.approx(
            apply_map(sys, x, 4).coords, abs=1e-12
        )


# ---------------------------------------------------------------------------
# companions and contraction


def test_stable_direction_is_an_eigenvector():
    sys = torus_automorphism(CAT)
    v = stable_direction(sys)
    lam = (3.0 - math.sqrt(5.0)) / 2.0
    np.testing.assert_allclose(np.asarray(CAT) @ v, lam * v, atol=1e-12)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)


def test_stable_direction_needs_hyperbolicity():
    with pytest.raises(ConfigurationError):
        stable_direction(torus_automorphism([[0, -1], [1, 0]]))  # rotation by 90deg


def test_identity_companion_is_identity():
    sys = torus_automorphism(CAT)
    x = TorusPoint((0.3, 0.6))
    assert apply_companion(sys, identity_companion(), x).coords == x.coords


def test_stable_translation_contracts_exponentially():
    sys = torus_automorphism(CAT)
    comp = stable_translation(sys, 0.01)
    x = TorusPoint((0.37, 0.58))
    ux = apply_companion(sys, comp, x)
    lam = (3.0 - math.sqrt(5.0)) / 2.0
    d0 = distance(sys, x, ux)
    assert d0 == pytest.approx(0.01, abs=1e-12)
    d5 = distance(sys, apply_map(sys, x, 5), apply_map(sys, ux, 5))
    assert d5 == pytest.approx(0.01 * lam**5, rel=1e-8)


def test_contraction_profile_slope_matches_stable_eigenvalue():
    sys = torus_automorphism(CAT)
    comp = stable_translation(sys, 0.35)
    x = sample_batch(sys, Stream(3).child("c"), 0, 1).point(0)
    prof = contraction_profile(sys, comp, x, 200)
    assert prof.contracting
    lam = (3.0 - math.sqrt(5.0)) / 2.0
    assert prof.slope == pytest.approx(math.log(lam), rel=1e-9)


def test_translation_companion_on_rotation_never_contracts():
    sys = torus_translation([0.339887, 0.754877])
    comp = translation_companion([0.1, 0.05])
    x = TorusPoint((0.2, 0.9))
    prof = contraction_profile(sys, comp, x, 50)
    assert not prof.contracting
    d = np.asarray(prof.distances)
    np.testing.assert_allclose(d, d[0], atol=1e-12)  # isometry: constant gap


def test_companion_batch_matches_pointwise():
    sys = torus_automorphism(CAT)
    comp = stable_translation(sys, 0.2)
    batch = sample_batch(sys, Stream(17).child("cb"), 0, 6)
    moved = companion_batch(batch, comp)
    for i in range(6):
        expect = apply_companion(sys, comp, batch.point(i))
        assert moved.point(i).coords == pytest.approx(expect.coords, abs=1e-15)


def test_companion_kind_system_mismatch():
    shift = two_sided_shift([0.5, 0.5])
    x = sample_measure(shift, Stream(1).child("x"), 0)
    with pytest.raises((ConfigurationError, DomainError)):
        apply_companion(shift, translation_companion([0.1]), x)
