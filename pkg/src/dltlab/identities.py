"""Exact structural identities used as fast self-checks.

Four families, each a mechanical consequence of the definitions rather
than a statistical statement, so they hold to rounding error on every
orbit and make cheap smoke detectors for the heavy numerics:

* composition: the matrix product over r+s steps equals the product over
  the last s steps applied to the product over the first r;
* time reversal: the corrected sum at x equals the reversed corrected sum
  started at the (N-1)-step image of x (same summands, reversed order);
* top exterior power: the log-expansion of the top wedge equals the sum
  of log |det| along the orbit;
* renormalization transparency: log-expansion values do not depend on the
  internal rescaling cadence beyond rounding error.

Each check returns an :class:`IdentityCheck` with the worst error seen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .birkhoff import NormalizingScheme, Observable, corrected_sum_batch
from .cocycle import (
    MatrixCocycle,
    exterior_power,
    sample_directions,
    sigma_vec_batch,
)
from .dynamics import PhaseSpaceSystem, ShiftBatch, TorusBatch, sample_batch, step_batch
from .errors import DomainError
from .streams import Stream

__all__ = [
    "IdentityCheck",
    "composition_identity_check",
    "time_reversal_check",
    "top_wedge_det_check",
    "renorm_transparency_check",
]

_COMPOSITION_LOG_CAP = 300.0  # keep raw products of length n_max finite


@dataclass(frozen=True)
class IdentityCheck:
    """Worst-case error of an exact identity over sampled cases."""

    name: str
    n_cases: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def _state_snapshot_arrays(batch, n: int):
    if isinstance(batch, TorusBatch):
        return np.empty_like(batch.coords)
    return np.empty(n, dtype=np.int64)


def _record_state(batch, store, mask) -> None:
    if isinstance(batch, TorusBatch):
        store[mask] = batch.coords[mask]
    else:
        store[mask] = batch.offsets[mask]


def _rebuild(batch, store):
    if isinstance(batch, TorusBatch):
        return TorusBatch(batch.sys, store.copy())
    return ShiftBatch(batch.sys, batch.seeds.copy(), store.copy())


def composition_identity_check(
    coc: MatrixCocycle,
    stream: Stream,
    n_cases: int = 1000,
    n_max_total: int = 40,
    tolerance: float = 1e-9,
) -> IdentityCheck:
    """Relative error of the two-stage product rule on random (x, r, s).

    Splits r + s <= n_max_total are drawn with r, s >= 0.  Each case
    compares the product over r + s steps against the product over s
    steps from the r-step image, times the product over r steps, all as
    raw (unrescaled) products, so n_max_total times the generator's
    log-norm bound must stay well inside float range.
    """
    if n_cases < 1:
        raise DomainError("need at least one case")
    if n_max_total < 1:
        raise DomainError("n_max_total must be >= 1")
    if n_max_total * coc.generator.log_norm_bound > _COMPOSITION_LOG_CAP:
        raise DomainError(
            "raw products over n_max_total steps would overflow; shorten the span"
        )
    d = coc.dim
    gen = coc.generator
    u = stream.child("splits").uniform_items(0, n_cases, 2)
    r = np.minimum((u[:, 0] * (n_max_total + 1)).astype(np.int64), n_max_total)
    s = np.minimum(
        (u[:, 1] * (n_max_total - r + 1)).astype(np.int64), n_max_total - r
    )
    total = r + s

    batch = sample_batch(coc.sys, stream.child("points"), 0, n_cases)
    eye = np.broadcast_to(np.eye(d), (n_cases, d, d))
    prod = eye.copy()
    c_first = np.empty((n_cases, d, d))
    c_whole = np.empty((n_cases, d, d))
    mid_state = _state_snapshot_arrays(batch, n_cases)
    for n in range(n_max_total + 1):
        at_r = r == n
        if at_r.any():
            c_first[at_r] = prod[at_r]
            _record_state(batch, mid_state, at_r)
        at_total = total == n
        if at_total.any():
            c_whole[at_total] = prod[at_total]
        if n == n_max_total:
            break
        prod = np.matmul(gen.matrices_batch(batch), prod)
        step_batch(batch, 1)

    mid = _rebuild(batch, mid_state)
    prod = eye.copy()
    c_second = np.empty((n_cases, d, d))
    s_max = int(s.max())
    for n in range(s_max + 1):
        at_s = s == n
        if at_s.any():
            c_second[at_s] = prod[at_s]
        if n == s_max:
            break
        prod = np.matmul(gen.matrices_batch(mid), prod)
        step_batch(mid, 1)

    resid = np.matmul(c_second, c_first) - c_whole
    num = np.max(np.abs(resid), axis=(1, 2))
    den = np.maximum(1.0, np.max(np.abs(c_whole), axis=(1, 2)))
    return IdentityCheck(
        name="composition",
        n_cases=n_cases,
        max_error=float(np.max(num / den)),
        tolerance=tolerance,
    )


def time_reversal_check(
    sys: PhaseSpaceSystem,
    f: Observable,
    scheme: NormalizingScheme,
    stream: Stream,
    n_points: int = 8,
    n_steps: int = 10_000,
    tolerance: float = 1e-9,
) -> IdentityCheck:
    """Relative gap between S_N(x) and the reversed sum at the (N-1)-image."""
    if n_points < 1 or n_steps < 1:
        raise DomainError("need n_points >= 1 and n_steps >= 1")
    initial = sample_batch(sys, stream.child("points"), 0, n_points)
    back = initial.copy()
    forward, _ = corrected_sum_batch(sys, f, initial, n_steps, scheme)

    step_batch(back, n_steps - 1)
    sums = np.zeros(n_points)
    comp = np.zeros(n_points)
    for _ in range(n_steps):
        v = f.evaluate_batch(back)
        y = v - comp
        t = sums + y
        comp = (t - sums) - y
        sums = t
        step_batch(back, -1)
    reverse = (sums - scheme.a_value(n_steps)) / scheme.v_value(n_steps)

    err = np.abs(forward - reverse) / np.maximum(1.0, np.abs(forward))
    return IdentityCheck(
        name="time_reversal",
        n_cases=n_points,
        max_error=float(np.max(err)),
        tolerance=tolerance,
    )


def top_wedge_det_check(
    coc: MatrixCocycle,
    stream: Stream,
    n_samples: int = 256,
    n_steps: int = 200,
    tolerance: float = 1e-8,
) -> IdentityCheck:
    """Top-wedge log-expansion vs the orbit sum of log |det|.

    The two sides follow different code paths (rescaled running products
    vs a compensated sum of per-step log-determinants), so agreement
    exercises the exterior-power plumbing end to end.
    """
    if n_samples < 1 or n_steps < 1:
        raise DomainError("need n_samples >= 1 and n_steps >= 1")
    wedge = exterior_power(coc, coc.dim)
    batch = sample_batch(coc.sys, stream.child("points"), 0, n_samples)
    det_batch = batch.copy()

    ones = np.ones((n_samples, 1))
    sig, _, _ = sigma_vec_batch(wedge, batch, ones, n_steps)

    sums = np.zeros(n_samples)
    comp = np.zeros(n_samples)
    for _ in range(n_steps):
        mats = coc.generator.matrices_batch(det_batch)
        v = np.log(np.abs(np.linalg.det(mats)))
        y = v - comp
        t = sums + y
        comp = (t - sums) - y
        sums = t
        step_batch(det_batch, 1)

    return IdentityCheck(
        name="top_wedge_det",
        n_cases=n_samples,
        max_error=float(np.max(np.abs(sig - sums))),
        tolerance=tolerance,
    )


def renorm_transparency_check(
    coc: MatrixCocycle,
    stream: Stream,
    n_samples: int = 128,
    n_steps: int = 500,
    periods: tuple[int, ...] = (1, 64),
    tolerance: float = 1e-8,
) -> IdentityCheck:
    """Spread of log-expansion values across rescaling cadences.

    Rescaling divides the running vector by its norm and reglues the log;
    each reglue costs one rounding, so cadences agree to rounding error
    rather than bitwise.  Requested periods are clamped to the overflow
    budget.
    """
    if n_samples < 1 or n_steps < 1:
        raise DomainError("need n_samples >= 1 and n_steps >= 1")
    if len(periods) < 1:
        raise DomainError("need at least one alternative period")
    bound = max(coc.generator.log_norm_bound, 1e-12)
    budget_cap = max(1, int(300.0 * np.log(2.0) / bound))
    initial = sample_batch(coc.sys, stream.child("points"), 0, n_samples)
    dirs = sample_directions(stream.child("directions"), 0, n_samples, coc.dim)

    baseline, _, _ = sigma_vec_batch(coc, initial.copy(), dirs, n_steps)
    worst = 0.0
    for p in periods:
        clamped = max(1, min(int(p), budget_cap))
        variant = MatrixCocycle(coc.sys, coc.generator, renorm_period=clamped)
        sig, _, _ = sigma_vec_batch(variant, initial.copy(), dirs, n_steps)
        worst = max(worst, float(np.max(np.abs(sig - baseline))))

    return IdentityCheck(
        name="renorm_transparency",
        n_cases=n_samples * len(periods),
        max_error=worst,
        tolerance=tolerance,
    )
