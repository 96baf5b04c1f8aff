"""Sampling estimators: empirical distributions, events, and limit-law checks."""

import math

import numpy as np
import pytest
from scipy import stats as sp_stats

from dltlab.birkhoff import (
    clt_scheme,
    constant_observable,
    coordinate_cosine,
    coordinate_symbol,
    lln_scheme,
)
from dltlab.dynamics import (
    TorusBatch,
    identity_companion,
    sample_batch,
    torus_automorphism,
    torus_translation,
    two_sided_shift,
)
from dltlab.errors import ConfigurationError, DomainError
from dltlab.laws import dirac_law, empirical_law, gaussian_law
from dltlab.stats import (
    ObservableSource,
    char_fn_estimate,
    empirical_from_values,
    estimate_conditional_dlt,
    estimate_mixing_correlation,
    estimate_mixing_dlt,
    estimate_plain_dlt,
    full_space,
    interval,
    ks_distance,
    law_mass,
    projective_cap,
    shift_cylinder,
    torus_box,
    variance_green_kubo,
)
from dltlab.streams import Stream

CAT = torus_automorphism(((2, 1), (1, 1)))
COIN = two_sided_shift((0.5, 0.5))


def bernoulli_source():
    f = coordinate_symbol(COIN, 0)
    return ObservableSource(sys=COIN, observable=f, scheme=clt_scheme(0.5, 0.25))


# ---------------------------------------------------------------------------
# empirical distributions and KS distance


def test_empirical_sorts_and_handles_ties():
    emp = empirical_from_values([3.0, 1.0, 1.0, 2.0])
    assert np.array_equal(emp.samples, [1.0, 1.0, 2.0, 3.0])
    assert emp.count == 4
    assert emp.cdf_at(0.99) == 0.0
    assert emp.cdf_at(1.0) == 0.5
    assert emp.cdf_at(2.5) == 0.75
    assert emp.cdf_at(3.0) == 1.0


def test_empirical_rejects_bad_input():
    with pytest.raises(DomainError):
        empirical_from_values([])
    with pytest.raises(DomainError):
        empirical_from_values([1.0, float("nan")])


def test_ks_against_point_mass():
    assert ks_distance(empirical_from_values([0.1, 0.2]), dirac_law()) == 1.0
    assert ks_distance(empirical_from_values([0.0, 0.0, 0.0]), dirac_law()) == 0.0
    # half the mass strictly left of the atom
    assert ks_distance(empirical_from_values([-1.0, 0.0]), dirac_law()) == 0.5


def test_ks_matches_scipy_continuous():
    rng = np.random.default_rng(7)
    xs = rng.normal(size=200)
    got = ks_distance(empirical_from_values(xs), gaussian_law(1.0))
    want = sp_stats.kstest(xs, sp_stats.norm.cdf).statistic
    assert got == pytest.approx(want, abs=1e-14)


def test_ks_matches_scipy_with_ties():
    rng = np.random.default_rng(11)
    xs = rng.integers(-3, 4, size=60) / 2.0
    got = ks_distance(empirical_from_values(xs), gaussian_law(1.0))
    want = sp_stats.kstest(xs, sp_stats.norm.cdf).statistic
    assert got == pytest.approx(want, abs=1e-14)


def test_ks_two_sample_route():
    rng = np.random.default_rng(13)
    s1 = rng.normal(size=80)
    s2 = rng.normal(size=55) + 0.4
    got = ks_distance(empirical_from_values(s1), empirical_law(s2))
    want = sp_stats.ks_2samp(s1, s2).statistic
    assert got == pytest.approx(want, abs=1e-14)


# ---------------------------------------------------------------------------
# intervals


def test_interval_needs_ordered_endpoints():
    with pytest.raises(ConfigurationError):
        interval(1.0, 1.0)
    with pytest.raises(ConfigurationError):
        interval(2.0, -2.0)


def test_interval_containment_is_strict():
    iv = interval(-1.0, 1.0)
    got = iv.contains(np.array([-1.0, -0.999, 0.0, 1.0, 1.5]))
    assert np.array_equal(got, [False, True, True, False, False])
    unbounded = interval(0.0, np.inf)
    assert np.array_equal(unbounded.contains(np.array([0.0, 1e300])), [False, True])


def test_law_mass_rejects_endpoint_on_atom():
    assert law_mass(gaussian_law(1.0), interval(-1.0, 1.0)) == pytest.approx(
        sp_stats.norm.cdf(1.0) - sp_stats.norm.cdf(-1.0), abs=1e-14
    )
    with pytest.raises(DomainError):
        law_mass(dirac_law(), interval(0.0, 1.0))
    with pytest.raises(DomainError):
        law_mass(dirac_law(), interval(-1.0, 0.0))


# ---------------------------------------------------------------------------
# events


def test_full_space_event():
    ev = full_space()
    assert ev.exact_mass == 1.0
    batch = sample_batch(CAT, Stream(3).child("pts"), 0, 5)
    assert np.all(ev.member(batch, None))


def test_torus_box_mass_and_membership():
    ev = torus_box((0.0, 0.0), (0.5, 0.75))
    assert ev.exact_mass == 0.375
    coords = np.array([[0.0, 0.0], [0.25, 0.5], [0.5, 0.2], [0.25, 0.75]])
    batch = TorusBatch(sys=CAT, coords=coords)
    got = ev.member(batch, None)
    # half-open on each coordinate: lower edge in, upper edge out
    assert np.array_equal(got, [True, True, False, False])


def test_torus_box_validation():
    with pytest.raises(ConfigurationError):
        torus_box((0.0,), (0.5, 0.6))
    with pytest.raises(ConfigurationError):
        torus_box((0.5, 0.0), (0.5, 1.0))
    with pytest.raises(ConfigurationError):
        torus_box((0.0, 0.0), (0.5, 1.2))
    batch = sample_batch(COIN, Stream(3).child("pts"), 0, 4)
    with pytest.raises(DomainError):
        torus_box((0.0, 0.0), (0.5, 0.5)).member(batch, None)


def test_shift_cylinder_mass_and_membership():
    sys = two_sided_shift((0.2, 0.3, 0.5))
    ev = shift_cylinder(sys, -1, (2, 0))
    assert ev.exact_mass == pytest.approx(0.1, abs=1e-15)
    batch = sample_batch(sys, Stream(9).child("pts"), 0, 64)
    got = ev.member(batch, None)
    block = batch.symbol_block(-1, 1)
    want = (block[:, 0] == 2) & (block[:, 1] == 0)
    assert np.array_equal(got, want)
    assert 0 < np.count_nonzero(got) < 64


def test_shift_cylinder_validation():
    with pytest.raises(ConfigurationError):
        shift_cylinder(CAT, 0, (1,))
    with pytest.raises(ConfigurationError):
        shift_cylinder(COIN, 0, ())
    with pytest.raises(ConfigurationError):
        shift_cylinder(COIN, 0, (2,))


def test_projective_cap_mass_closed_forms():
    # on the circle of directions the cap has arc fraction 2 theta / pi
    for theta in (0.2, 0.7, math.pi / 2):
        ev = projective_cap((1.0, 0.0), theta)
        assert ev.exact_mass == pytest.approx(2.0 * theta / math.pi, abs=1e-12)
    # on the 2-sphere the folded cap mass is 1 - cos theta
    for theta in (0.3, 1.0, math.pi / 2):
        ev = projective_cap((0.0, 0.0, 2.0), theta)
        assert ev.exact_mass == pytest.approx(1.0 - math.cos(theta), abs=1e-12)


def test_projective_cap_membership_folds_antipodes():
    ev = projective_cap((1.0, 0.0), 0.5)
    dirs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    assert np.array_equal(ev.member(None, dirs), [True, True, False])
    with pytest.raises(DomainError):
        ev.member(None, None)


def test_projective_cap_monte_carlo_mass():
    from dltlab.cocycle import sample_directions

    ev = projective_cap((0.0, 1.0, 0.0), 0.8)
    dirs = sample_directions(Stream(21).child("dirs"), 0, 20000, 3)
    frac = np.count_nonzero(ev.member(None, dirs)) / 20000
    se = math.sqrt(ev.exact_mass * (1.0 - ev.exact_mass) / 20000)
    assert abs(frac - ev.exact_mass) <= 5.0 * se


def test_projective_cap_validation():
    with pytest.raises(ConfigurationError):
        projective_cap((0.0, 0.0), 0.5)
    with pytest.raises(ConfigurationError):
        projective_cap((1.0, 0.0), 0.0)
    with pytest.raises(ConfigurationError):
        projective_cap((1.0, 0.0), 2.0)


# ---------------------------------------------------------------------------
# plain distributional estimates


def test_plain_dlt_constant_observable_is_exact():
    src = ObservableSource(
        sys=CAT, observable=constant_observable(0.5), scheme=lln_scheme(0.5)
    )
    res = estimate_plain_dlt(src, [10, 100], 200, Stream(31).child("plain"))
    assert [p.ks for p in res.points] == [0.0, 0.0]
    assert res.trend == "flat"
    assert np.all(res.points[0].empirical.samples == 0.0)


def test_plain_dlt_bernoulli_clt_smoke():
    res = estimate_plain_dlt(bernoulli_source(), [256], 4000, Stream(32).child("plain"))
    assert res.points[0].ks < 0.05
    assert res.points[0].n_samples == 4000


def test_plain_dlt_validation():
    src = bernoulli_source()
    with pytest.raises(DomainError):
        estimate_plain_dlt(src, [], 200, Stream(1).child("s"))
    with pytest.raises(DomainError):
        estimate_plain_dlt(src, [0], 200, Stream(1).child("s"))
    with pytest.raises(DomainError):
        estimate_plain_dlt(src, [10], 99, Stream(1).child("s"))


def test_plain_dlt_worker_count_invariance():
    src = bernoulli_source()
    one = estimate_plain_dlt(src, [64], 600, Stream(33).child("w"), workers=1)
    many = estimate_plain_dlt(src, [64], 600, Stream(33).child("w"), workers=3)
    assert np.array_equal(
        one.points[0].empirical.samples, many.points[0].empirical.samples
    )


# ---------------------------------------------------------------------------
# conditional estimates


def test_conditional_with_full_space_reduces_to_plain_mass():
    src = bernoulli_source()
    iv = interval(-1.0, 1.0)
    stream = Stream(41).child("cond")
    cond = estimate_conditional_dlt(src, full_space(), iv, 128, 2000, stream)
    plain = estimate_plain_dlt(src, [128], 2000, stream)
    inside = np.count_nonzero(iv.contains(plain.points[0].empirical.samples))
    assert cond.estimate == inside / 2000
    assert cond.mass_a == 1.0
    assert cond.target == law_mass(src.scheme.law, iv)


def test_conditional_independent_event_passes():
    # the pinned symbol sits at index -1, outside every Birkhoff window,
    # so the product form is exact and only sampling noise remains
    src = bernoulli_source()
    ev = shift_cylinder(COIN, -1, (1,))
    iv = interval(-1.0, 1.0)
    res = estimate_conditional_dlt(src, ev, iv, 200, 4000, Stream(42).child("cond"))
    assert res.mass_a == 0.5
    assert res.law_mass == law_mass(src.scheme.law, iv)
    assert res.target == res.mass_a * res.law_mass
    assert res.deviation == abs(res.estimate - res.target)
    assert res.tolerance == max(0.02, 5.0 * res.std_error)
    assert res.passed


def test_conditional_explicit_tolerance_and_validation():
    src = bernoulli_source()
    iv = interval(-0.5, 0.5)
    res = estimate_conditional_dlt(
        src, full_space(), iv, 16, 150, Stream(43).child("c"), tolerance=2.0
    )
    assert res.tolerance == 2.0
    assert res.passed
    with pytest.raises(DomainError):
        estimate_conditional_dlt(src, full_space(), iv, 16, 99, Stream(1).child("c"))


# ---------------------------------------------------------------------------
# mixing estimates


def test_mixing_dlt_reports_missing_companion():
    src = bernoulli_source()
    a = shift_cylinder(COIN, -1, (0,))
    b = shift_cylinder(COIN, 0, (1,))
    iv = interval(-2.0, 2.0)
    bare = estimate_mixing_dlt(src, a, b, iv, 16, 200, Stream(51).child("m"))
    assert bare.companion_missing
    held = estimate_mixing_dlt(
        src, a, b, iv, 16, 200, Stream(51).child("m"), companion=identity_companion()
    )
    assert not held.companion_missing
    assert held.estimate == bare.estimate


def test_mixing_dlt_independent_events_pass():
    # initial-side symbol -1 and terminal-side symbol 0 (original index N)
    # both fall outside the summed window, so the triple product is exact
    src = bernoulli_source()
    a = shift_cylinder(COIN, -1, (1,))
    b = shift_cylinder(COIN, 0, (0,))
    iv = interval(-1.0, 1.0)
    res = estimate_mixing_dlt(src, a, b, iv, 64, 4000, Stream(52).child("m"))
    assert res.mass_a == 0.5
    assert res.mass_b == 0.5
    assert res.target == 0.25 * law_mass(src.scheme.law, iv)
    assert res.passed


def test_mixing_dlt_validation():
    src = bernoulli_source()
    a = shift_cylinder(COIN, 0, (0,))
    with pytest.raises(DomainError):
        estimate_mixing_dlt(src, a, a, interval(-1.0, 1.0), 8, 50, Stream(1).child("m"))


# ---------------------------------------------------------------------------
# mixing correlations


def test_mixing_correlation_disjoint_events_at_zero_steps():
    a = shift_cylinder(COIN, 0, (0,))
    b = shift_cylinder(COIN, 0, (1,))
    res = estimate_mixing_correlation(COIN, a, b, [0], 200, Stream(61).child("corr"))
    pt = res.points[0]
    assert pt.estimate == 0.0
    assert pt.target == 0.25
    assert pt.deviation == 0.25


def test_mixing_correlation_reaches_product_level():
    a = shift_cylinder(COIN, 0, (0,))
    b = shift_cylinder(COIN, 0, (1,))
    res = estimate_mixing_correlation(COIN, a, b, [1, 8], 4000, Stream(62).child("corr"))
    for pt in res.points:
        assert pt.deviation <= 5.0 * pt.std_error


def test_mixing_correlation_worker_count_invariance():
    a = torus_box((0.0, 0.0), (0.5, 1.0))
    b = torus_box((0.0, 0.0), (1.0, 0.5))
    one = estimate_mixing_correlation(CAT, a, b, [3], 600, Stream(63).child("c"), workers=1)
    many = estimate_mixing_correlation(CAT, a, b, [3], 600, Stream(63).child("c"), workers=4)
    assert one.points[0].estimate == many.points[0].estimate


# ---------------------------------------------------------------------------
# characteristic-function route


def test_char_fn_at_zero_is_exact():
    res = char_fn_estimate(
        bernoulli_source(), 0.0, full_space(), 32, 400, Stream(71).child("cf")
    )
    assert res.estimate == 1.0 + 0.0j
    assert res.target == 1.0 + 0.0j
    assert res.deviation == 0.0
    assert res.se_real == 0.0


def test_char_fn_at_zero_with_event_weight():
    ev = shift_cylinder(COIN, -1, (1,))
    res = char_fn_estimate(
        bernoulli_source(), 0.0, ev, 32, 2000, Stream(72).child("cf")
    )
    assert res.estimate.imag == 0.0
    assert res.target == 0.5 + 0.0j
    assert abs(res.estimate.real - 0.5) <= 5.0 * res.se_real


def test_char_fn_gaussian_smoke():
    res = char_fn_estimate(
        bernoulli_source(), 0.7, full_space(), 256, 4000, Stream(73).child("cf")
    )
    assert res.target == pytest.approx(math.exp(-0.5 * 0.25 * 0.49), abs=1e-12)
    assert res.deviation <= max(0.02, 6.0 * (res.se_real + res.se_imag))


def test_char_fn_validation():
    src = bernoulli_source()
    with pytest.raises(DomainError):
        char_fn_estimate(src, 100.5, full_space(), 8, 200, Stream(1).child("cf"))
    with pytest.raises(DomainError):
        char_fn_estimate(src, 1.0, full_space(), 8, 50, Stream(1).child("cf"))


# ---------------------------------------------------------------------------
# Green-Kubo variance


def test_green_kubo_constant_observable_is_exactly_zero():
    res = variance_green_kubo(
        CAT, constant_observable(0.7), 5, 200, Stream(81).child("gk")
    )
    assert res.variance == 0.0
    assert res.variance_raw == 0.0
    assert not res.clamped
    assert res.tail_ok
    assert all(c == 0.0 for c in res.lag_covariances)


def test_green_kubo_bernoulli_symbol():
    f = coordinate_symbol(COIN, 0)
    res = variance_green_kubo(COIN, f, 5, 40000, Stream(82).child("gk"))
    assert abs(res.variance - 0.25) <= 0.02
    assert not res.clamped


def test_green_kubo_cat_cosine():
    f = coordinate_cosine((1, 0))
    res = variance_green_kubo(CAT, f, 5, 40000, Stream(83).child("gk"))
    assert abs(res.variance - 0.5) <= 0.02
    assert not res.clamped


def test_green_kubo_clamps_negative_sums():
    # rotation by 0.35 with a cosine: Cov(k) = cos(2 pi k 0.35) / 2, and the
    # truncated sum at lag 2 is negative, so the clamp must engage
    sys = torus_translation((0.35,))
    f = coordinate_cosine((1,))
    res = variance_green_kubo(sys, f, 2, 2000, Stream(84).child("gk"))
    want_raw = 0.5 + math.cos(2 * math.pi * 0.35) + math.cos(2 * math.pi * 0.70)
    assert res.variance_raw == pytest.approx(want_raw, abs=0.05)
    assert res.clamped
    assert res.variance == 0.0
    assert not res.tail_ok


def test_green_kubo_validation():
    f = constant_observable(1.0)
    with pytest.raises(DomainError):
        variance_green_kubo(CAT, f, 0, 200, Stream(1).child("gk"))
    with pytest.raises(DomainError):
        variance_green_kubo(CAT, f, 1001, 200, Stream(1).child("gk"))
    with pytest.raises(DomainError):
        variance_green_kubo(CAT, f, 5, 99, Stream(1).child("gk"))
