"""Interval exchanges, accelerated induction, and the induction cocycle."""

import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from dltlab.errors import ConfigurationError, DiagnosticError, DomainError, NonGenericIETError
from dltlab.streams import Stream
from dltlab.zorich import (
    interval_exchange,
    iet_apply,
    rauzy_step,
    transfer_matrix,
    zorich_run_lengths,
    zorich_spectrum,
    zorich_step,
)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


# ---------------------------------------------------------------------------
# construction and the exchange map


def test_interval_exchange_validation():
    with pytest.raises(ConfigurationError):
        interval_exchange((1.0,), (1,))
    with pytest.raises(ConfigurationError):
        interval_exchange((0.5, 0.5), (1, 2))  # reducible: prefix {1} fixed
    with pytest.raises(ConfigurationError):
        interval_exchange((0.3, 0.3, 0.4), (1, 3, 2))  # same, longer
    with pytest.raises(ConfigurationError):
        interval_exchange((0.5, 0.5), (2, 2))
    with pytest.raises(ConfigurationError):
        interval_exchange((0.5, -0.5), (2, 1))


def test_float_lengths_normalized_exact_lengths_kept():
    iet = interval_exchange((3.0, 1.0), (2, 1))
    assert math.fsum(iet.lengths) == pytest.approx(1.0, abs=1e-15)
    exact = interval_exchange((Fraction(3), Fraction(1)), (2, 1))
    assert exact.lengths == (Fraction(3), Fraction(1))
    assert exact.total() == Fraction(4)


def test_iet_apply_is_the_two_interval_rotation():
    a, b = 0.375, 0.625
    iet = interval_exchange((a, b), (2, 1))
    assert iet_apply(iet, 0.25) == pytest.approx(b + 0.25, abs=1e-15)
    assert iet_apply(iet, 0.5) == pytest.approx(0.5 - a, abs=1e-15)
    with pytest.raises(DomainError):
        iet_apply(iet, 1.0)
    with pytest.raises(DomainError):
        iet_apply(iet, -0.1)


def test_iet_apply_exact_on_fractions():
    iet = interval_exchange((Fraction(1, 3), Fraction(2, 3)), (2, 1))
    assert iet_apply(iet, Fraction(1, 6)) == Fraction(5, 6)
    assert iet_apply(iet, Fraction(1, 2)) == Fraction(1, 6)


def test_iet_apply_is_injective_on_samples():
    iet = interval_exchange((0.2, 0.3, 0.15, 0.35), (4, 3, 2, 1))
    xs = [i / 97.0 for i in range(97)]
    ys = [iet_apply(iet, x) for x in xs]
    assert len(set(ys)) == len(ys)
    assert all(0.0 <= y < 1.0 for y in ys)


# ---------------------------------------------------------------------------
# induction steps


def test_rauzy_step_hand_case():
    iet = interval_exchange((0.7, 0.3), (2, 1))
    step = rauzy_step(iet)
    # rightmost bottom label 1 (length .7) beats rightmost top label 2 (.3)
    assert step.step_type == "bottom"
    assert step.winner == 1
    assert step.loser == 2
    assert step.iet.lengths[0] == pytest.approx(0.4, abs=1e-15)
    assert step.iet.lengths[1] == pytest.approx(0.3, abs=1e-15)
    assert step.iet.top == (1, 2)
    assert step.iet.bottom == (2, 1)


def test_rauzy_step_rejects_tie():
    with pytest.raises(NonGenericIETError):
        rauzy_step(interval_exchange((0.5, 0.5), (2, 1)))


def test_transfer_matrix_shape():
    b = transfer_matrix(3, 2, 3)
    assert b.dtype == np.int64
    expect = np.eye(3, dtype=np.int64)
    expect[1, 2] += 1
    assert np.array_equal(b, expect)


def test_zorich_step_transfer_reconstructs_old_lengths():
    # lambda_old = B lambda_new, checked in exact rational arithmetic
    iet = interval_exchange(
        (Fraction(13, 40), Fraction(11, 40), Fraction(9, 40), Fraction(7, 40)),
        (4, 3, 2, 1),
    )
    z = zorich_step(iet)
    assert round(float(np.linalg.det(z.transfer.astype(np.float64)))) == 1
    for i in range(4):
        rebuilt = sum(
            Fraction(int(z.transfer[i, j])) * z.iet.lengths[j] for j in range(4)
        )
        assert rebuilt == iet.lengths[i]


def test_zorich_step_golden_ratio_shrink():
    # the golden two-interval exchange renormalizes by exactly one golden
    # ratio per accelerated step, with run length one; the fixed point is
    # repelling, so rounding drift compounds and the tolerance must breathe
    lengths = (1.0 / GOLDEN, 1.0 - 1.0 / GOLDEN)
    cur = interval_exchange(lengths, (2, 1))
    for _ in range(6):
        z = zorich_step(cur)
        assert z.run_length == 1
        assert z.log_shrink == pytest.approx(math.log(GOLDEN), abs=1e-12)
        cur = z.iet


def test_zorich_step_max_run_guard():
    iet = interval_exchange((Fraction(1, 100), Fraction(99, 100)), (2, 1))
    with pytest.raises(NonGenericIETError):
        zorich_step(iet, max_run=10)


def test_run_lengths_are_continued_fraction_quotients():
    # ratio sqrt(2): quotients [1; 2, 2, 2, ...]
    x = sp.sqrt(2) - 1
    iet = interval_exchange((x, 1 - x), (2, 1))
    assert zorich_run_lengths(iet, 8) == [1, 2, 2, 2, 2, 2, 2, 2]


def test_run_lengths_match_sympy_for_a_messier_ratio():
    # run lengths follow the continued fraction of longer over shorter
    x = sp.sqrt(7) - 2
    ratio = x / (1 - x) if x > sp.Rational(1, 2) else (1 - x) / x
    oracle = []
    it = sp.continued_fraction_iterator(ratio)
    for q in it:
        oracle.append(int(q))
        if len(oracle) == 10:
            break
    iet = interval_exchange((x, 1 - x), (2, 1))
    assert zorich_run_lengths(iet, 10) == oracle


def test_rational_ratio_terminates_with_tie():
    iet = interval_exchange((Fraction(7, 10), Fraction(3, 10)), (2, 1))
    first = zorich_step(iet)
    assert first.run_length == 2  # 7 = 2 * 3 + 1
    with pytest.raises(NonGenericIETError):
        zorich_run_lengths(first.iet, 2)


def test_float_route_matches_exact_route_early():
    x = sp.sqrt(3) - 1
    exact = interval_exchange((x, 1 - x), (2, 1))
    approx = interval_exchange((float(x), 1.0 - float(x)), (2, 1))
    assert zorich_run_lengths(approx, 10) == zorich_run_lengths(exact, 10)


# ---------------------------------------------------------------------------
# spectrum of the induction cocycle


def test_spectrum_two_intervals():
    spec = zorich_spectrum((2, 1), Stream(401), n_orbits=8, n_steps=400)
    assert spec.n_orbits_used == 8
    # normalization by renormalization time pins the top exponent at one
    assert abs(spec.top - 1.0) <= max(0.03, 5.0 * spec.std_errors[0])
    # unimodular transfers: per-orbit exponent sums telescope to zero
    sums = spec.per_orbit.sum(axis=1)
    assert np.max(np.abs(sums)) <= 1e-9


def test_spectrum_four_intervals_pairing():
    spec = zorich_spectrum((4, 3, 2, 1), Stream(402), n_orbits=8, n_steps=1500)
    assert spec.exponents[0] > spec.exponents[1] > spec.exponents[2] > spec.exponents[3]
    assert abs(spec.top - 1.0) <= max(0.03, 5.0 * spec.std_errors[0])
    per = spec.per_orbit
    for i, j in ((0, 3), (1, 2)):
        pair = per[:, i] + per[:, j]
        se = pair.std(ddof=1) / math.sqrt(len(pair))
        assert abs(pair.mean()) <= 5.0 * max(se, 1e-12)
    assert np.max(np.abs(per.sum(axis=1))) <= 1e-9


def test_spectrum_validation_and_survival_guard():
    with pytest.raises(DomainError):
        zorich_spectrum((2, 1), Stream(403), n_orbits=1, n_steps=10)
    with pytest.raises(DiagnosticError):
        zorich_spectrum((2, 1), Stream(404), n_orbits=4, n_steps=10, min_survival=1.5)
