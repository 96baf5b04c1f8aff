"""Observables, normalizing schemes, and compensated orbit sums."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dltlab.birkhoff import (
    NormalizingScheme,
    adaptedness_profile,
    birkhoff_sum,
    clt_scheme,
    constant_observable,
    coordinate_cosine,
    coordinate_symbol,
    corrected_sum,
    corrected_sum_batch,
    lln_scheme,
    reversed_corrected_sum,
)
from dltlab.dynamics import (
    TorusPoint,
    apply_map,
    sample_batch,
    sample_measure,
    stable_translation,
    torus_automorphism,
    torus_translation,
    two_sided_shift,
)
from dltlab.errors import ConfigurationError, DomainError
from dltlab.identities import time_reversal_check
from dltlab.streams import Stream

CAT = torus_automorphism([[2, 1], [1, 1]])
SHIFT = two_sided_shift([0.5, 0.5])


# ---------------------------------------------------------------------------
# observables


def test_coordinate_cosine_values():
    f = coordinate_cosine((1, 0))
    assert f.evaluate(TorusPoint((0.0, 0.3))) == pytest.approx(1.0)
    assert f.evaluate(TorusPoint((0.5, 0.9))) == pytest.approx(-1.0)
    assert f.evaluate(TorusPoint((0.25, 0.1))) == pytest.approx(0.0, abs=1e-12)
    assert f.exact_mean == 0.0


def test_coordinate_cosine_batch_matches_single():
    f = coordinate_cosine((2, 1))
    batch = sample_batch(CAT, Stream(5).child("b"), 0, 32)
    vals = f.evaluate_batch(batch)
    for i in range(32):
        assert vals[i] == pytest.approx(f.evaluate(batch.point(i)), abs=1e-15)


def test_coordinate_symbol_reads_the_tape():
    f = coordinate_symbol(SHIFT, 0)
    x = sample_measure(SHIFT, Stream(5).child("pt"), 0)
    assert f.evaluate(x) == float(x.coordinate(0))
    g = coordinate_symbol(SHIFT, 3)
    assert g.evaluate(x) == float(x.coordinate(3))


def test_coordinate_symbol_needs_shift():
    with pytest.raises(ConfigurationError):
        coordinate_symbol(CAT, 0)


def test_constant_observable():
    f = constant_observable(2.5)
    assert f.evaluate(TorusPoint((0.4, 0.4))) == 2.5
    assert f.exact_mean == 2.5


# ---------------------------------------------------------------------------
# normalizing schemes


def test_scheme_sequences():
    s = clt_scheme(0.5, 0.25)
    assert s.a_value(100) == 50.0
    assert s.v_value(100) == 10.0
    t = lln_scheme(0.25)
    assert t.a_value(8) == 2.0
    assert t.v_value(8) == 8.0


def test_scheme_table_lookup_and_bounds():
    s = NormalizingScheme(
        averaging="table",
        normalizing="table",
        law=clt_scheme(0.0, 1.0).law,
        averaging_table=(1.0, 2.0),
        normalizing_table=(3.0, 4.0),
    )
    assert s.a_value(2) == 2.0
    assert s.v_value(1) == 3.0
    with pytest.raises(DomainError):
        s.a_value(3)


def test_scheme_validation():
    law = clt_scheme(0.0, 1.0).law
    with pytest.raises(ConfigurationError):
        NormalizingScheme(averaging="table", normalizing="sqrt", law=law)
    with pytest.raises(ConfigurationError):
        NormalizingScheme(
            averaging="zero",
            normalizing="table",
            law=law,
            normalizing_table=(1.0, -1.0),
        )
    with pytest.raises(ConfigurationError):
        NormalizingScheme(averaging="typo", normalizing="sqrt", law=law)


# ---------------------------------------------------------------------------
# orbit sums


def test_birkhoff_sum_of_constant_is_exact():
    f = constant_observable(0.1)
    x = TorusPoint((0.123, 0.456))
    assert birkhoff_sum(CAT, f, x, 1000) == pytest.approx(100.0, abs=1e-12)


def test_birkhoff_sum_matches_naive_loop():
    f = coordinate_cosine((1, 1))
    x = sample_measure(CAT, Stream(6).child("n"), 0)
    naive, y = [], x
    for _ in range(200):
        naive.append(f.evaluate(y))
        y = apply_map(CAT, y)
    assert birkhoff_sum(CAT, f, x, 200) == pytest.approx(math.fsum(naive), abs=1e-12)


def test_symbol_sum_matches_tape_count():
    f = coordinate_symbol(SHIFT, 0)
    x = sample_measure(SHIFT, Stream(6).child("s"), 1)
    total = birkhoff_sum(SHIFT, f, x, 500)
    assert total == float(np.sum(x.coordinates(0, 500)))


def test_corrected_sum_arithmetic():
    f = constant_observable(1.0)
    scheme = clt_scheme(0.25, 1.0)
    x = TorusPoint((0.2, 0.2))
    # (N*1 - N*0.25)/sqrt(N) at N=400: 300/20
    assert corrected_sum(CAT, f, x, 400, scheme) == pytest.approx(15.0, abs=1e-12)


def test_corrected_sum_batch_matches_single_bitwise():
    f = coordinate_cosine((1, 0))
    scheme = clt_scheme(0.0, 0.5)
    batch = sample_batch(CAT, Stream(7).child("cs"), 0, 16)
    singles = [corrected_sum(CAT, f, batch.point(i), 300, scheme) for i in range(16)]
    vals, _ = corrected_sum_batch(CAT, f, batch.copy(), 300, scheme)
    np.testing.assert_array_equal(vals, singles)


def test_corrected_sum_batch_shift_fast_path_matches_single_bitwise():
    f = coordinate_symbol(SHIFT, 0)
    scheme = clt_scheme(0.5, 0.25)
    batch = sample_batch(SHIFT, Stream(7).child("fp"), 0, 16)
    singles = [corrected_sum(SHIFT, f, batch.point(i), 257, scheme) for i in range(16)]
    vals, _ = corrected_sum_batch(SHIFT, f, batch.copy(), 257, scheme)
    np.testing.assert_array_equal(vals, singles)


def test_corrected_sum_batch_terminal_state_is_time_n():
    f = coordinate_cosine((1, 0))
    scheme = clt_scheme(0.0, 0.5)
    batch = sample_batch(CAT, Stream(7).child("term"), 0, 4)
    starts = [batch.point(i) for i in range(4)]
    _, final = corrected_sum_batch(CAT, f, batch, 25, scheme)
    for i, x in enumerate(starts):
        assert final.point(i).coords == pytest.approx(
            apply_map(CAT, x, 25).coords, abs=1e-12
        )


def test_compensated_sum_tracks_fsum_on_long_orbits():
    # rotation orbits of the cosine accumulate ~1e6 same-sign rounding hits;
    # the compensated route must stay at fsum, not drift like a naive sum
    sys = torus_translation([math.sqrt(2) - 1])
    f = coordinate_cosine((1,))
    x = TorusPoint((0.1,))
    n = 200_000
    vals, y = np.empty(n), x
    for i in range(n):
        vals[i] = f.evaluate(y)
        y = apply_map(sys, y)
    oracle = math.fsum(vals)
    got = birkhoff_sum(sys, f, x, n)
    assert got == pytest.approx(oracle, abs=5e-11)


@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=7))
@settings(max_examples=25, deadline=None)
def test_time_reversal_identity(n_steps, idx):
    """The forward corrected sum equals the backward sum from the far end.

    Short horizon only: the inverse map retraces the forward float orbit
    bitwise except near the freshly sampled start, where one-ulp rounding
    misses get amplified by the unstable eigenvalue per backward step.
    """
    f = coordinate_cosine((1, 0))
    scheme = clt_scheme(0.0, 0.5)
    x = sample_measure(CAT, Stream(11).child("rev"), idx)
    fwd = corrected_sum(CAT, f, x, n_steps, scheme)
    back = reversed_corrected_sum(CAT, f, apply_map(CAT, x, n_steps - 1), n_steps, scheme)
    assert back == pytest.approx(fwd, abs=1e-10)


def test_time_reversal_long_horizon_batch_route():
    """The library's own identity check holds at 1e-9 over 10k steps."""
    f = coordinate_cosine((1, 0))
    scheme = clt_scheme(0.0, 0.5)
    check = time_reversal_check(CAT, f, scheme, Stream(11).child("tr"), n_points=4)
    assert check.passed
    assert check.max_error <= 1e-9


def test_time_reversal_identity_on_shift():
    f = coordinate_symbol(SHIFT, 0)
    scheme = clt_scheme(0.5, 0.25)
    x = sample_measure(SHIFT, Stream(11).child("rs"), 0)
    fwd = corrected_sum(SHIFT, f, x, 77, scheme)
    back = reversed_corrected_sum(SHIFT, f, apply_map(SHIFT, x, 76), 77, scheme)
    assert back == pytest.approx(fwd, abs=1e-12)


def test_sum_rejects_negative_n_and_allows_empty():
    f = constant_observable(1.0)
    assert birkhoff_sum(CAT, f, TorusPoint((0.0, 0.0)), 0) == 0.0
    with pytest.raises(DomainError):
        birkhoff_sum(CAT, f, TorusPoint((0.0, 0.0)), -1)


# ---------------------------------------------------------------------------
# companion adaptedness


def test_adaptedness_bounded_for_contracting_pair():
    comp = stable_translation(CAT, 0.35)
    f = coordinate_cosine((1, 0))
    x = sample_batch(CAT, Stream(3).child("a"), 0, 1).point(0)
    prof = adaptedness_profile(CAT, f, comp, x, 400, scheme=clt_scheme(0.0, 0.5))
    assert prof.bounded
    assert prof.tail_increase <= 1e-9
    # deviations are cumulative |f(U-orbit) - f(orbit)| gaps: finite and small
    assert max(prof.deviations) < 10.0


def test_adaptedness_unbounded_for_drifting_pair():
    # translation companion on a rotation shifts the phase forever, so the
    # observable discrepancy grows linearly and the ratio to sqrt(N) climbs
    from dltlab.dynamics import translation_companion

    sys = torus_translation([math.sqrt(2) - 1])
    comp = translation_companion([0.25])
    f = coordinate_cosine((1,))
    x = TorusPoint((0.3,))
    prof = adaptedness_profile(sys, f, comp, x, 2000, scheme=clt_scheme(0.0, 1.0))
    assert not prof.bounded
