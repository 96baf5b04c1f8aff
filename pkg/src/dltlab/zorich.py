"""Interval exchange maps, Rauzy-Veech induction, Zorich acceleration.

An interval exchange is a pair of orderings (top, bottom) of d labelled
subintervals of [0, 1): the map cuts [0, 1) along the top order and
reassembles along the bottom order.  Induction compares the two rightmost
intervals, subtracts the shorter from the longer, and reinserts the loser:

    type 'top'    : top label wins,    lengths[w] -= lengths[l], bottom row edited
    type 'bottom' : bottom label wins, lengths[w] -= lengths[l], top row edited

Lengths transform by lambda_old = B lambda_new with B = I + E[winner, loser],
so the accumulated integer matrix counts interval visitations.  Zorich
acceleration groups maximal constant-type runs; for d = 2 the run lengths
are exactly the continued-fraction quotients of the length ratio, which is
the package's exactly-checkable surrogate for the renormalization cocycle.

Length arithmetic is duck-typed: float lengths renormalize to unit total
after every accelerated step, while exact (rational or symbolic) lengths
are left unnormalized so comparisons and subtractions stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DiagnosticError, DomainError, NonGenericIETError
from .streams import Stream

__all__ = [
    "IntervalExchange",
    "interval_exchange",
    "iet_apply",
    "RauzyStep",
    "rauzy_step",
    "transfer_matrix",
    "ZorichStep",
    "zorich_step",
    "zorich_run_lengths",
    "ZorichSpectrum",
    "zorich_spectrum",
]

_TIE_RTOL = 1e-14
_VISITATION_CAP = 1 << 62


def _is_float_length(v) -> bool:
    return isinstance(v, (float, np.floating))


@dataclass(frozen=True)
class IntervalExchange:
    """Labelled interval exchange: lengths by label, top and bottom orders."""

    lengths: tuple
    top: tuple[int, ...]
    bottom: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.lengths)

    def total(self):
        acc = self.lengths[0]
        for v in self.lengths[1:]:
            acc = acc + v
        return acc


def _check_order(order: tuple[int, ...], d: int, what: str) -> None:
    if sorted(order) != list(range(1, d + 1)):
        raise ConfigurationError(f"{what} order must be a permutation of 1..{d}")


def interval_exchange(lengths, permutation) -> IntervalExchange:
    """Exchange with top order 1..d and bottom order ``permutation``.

    Float lengths are normalized to unit total; exact lengths are kept as
    given.  The pair must be irreducible: no prefix of the bottom order may
    equal {1..k} for k < d, otherwise the exchange splits into two.
    """
    lens = tuple(lengths)
    d = len(lens)
    if d < 2:
        raise ConfigurationError("an interval exchange needs at least 2 intervals")
    bottom = tuple(int(p) for p in permutation)
    _check_order(bottom, d, "bottom")
    for k in range(1, d):
        if set(bottom[:k]) == set(range(1, k + 1)):
            raise ConfigurationError("reducible permutation: a prefix maps to itself")
    for v in lens:
        if not v > 0:
            raise ConfigurationError("lengths must be positive")
    if all(_is_float_length(v) for v in lens):
        s = math.fsum(float(v) for v in lens)
        lens = tuple(float(v) / s for v in lens)
    return IntervalExchange(lengths=lens, top=tuple(range(1, d + 1)), bottom=bottom)


def iet_apply(iet: IntervalExchange, x):
    """The exchange applied to a point of [0, total)."""
    if not (0 <= x < iet.total()):
        raise DomainError("point outside the exchanged interval")
    start = x * 0  # zero of the same arithmetic type
    for label in iet.top:
        ln = iet.lengths[label - 1]
        if x < start + ln:
            offset = x - start
            new_start = x * 0
            for other in iet.bottom:
                if other == label:
                    return new_start + offset
                new_start = new_start + iet.lengths[other - 1]
        start = start + ln
    raise DomainError("point did not land in any interval")  # pragma: no cover


@dataclass(frozen=True)
class RauzyStep:
    iet: IntervalExchange
    step_type: str  # 'top' | 'bottom'
    winner: int
    loser: int


def _tie(a, b) -> bool:
    if _is_float_length(a) and _is_float_length(b):
        return abs(a - b) <= _TIE_RTOL * max(abs(a), abs(b))
    return bool(a == b)


def rauzy_step(iet: IntervalExchange) -> RauzyStep:
    """One induction step on the rightmost intervals (unnormalized lengths)."""
    alpha = iet.top[-1]
    beta = iet.bottom[-1]
    la, lb = iet.lengths[alpha - 1], iet.lengths[beta - 1]
    if _tie(la, lb):
        raise NonGenericIETError(
            "rightmost intervals have equal length; the induction path is undefined"
        )
    lengths = list(iet.lengths)
    if la > lb:
        winner, loser, kind = alpha, beta, "top"
        lengths[alpha - 1] = la - lb
        row = list(iet.bottom[:-1])
        row.insert(row.index(winner) + 1, loser)
        new = IntervalExchange(tuple(lengths), iet.top, tuple(row))
    else:
        winner, loser, kind = beta, alpha, "bottom"
        lengths[beta - 1] = lb - la
        row = list(iet.top[:-1])
        row.insert(row.index(winner) + 1, loser)
        new = IntervalExchange(tuple(lengths), tuple(row), iet.bottom)
    return RauzyStep(iet=new, step_type=kind, winner=winner, loser=loser)


def transfer_matrix(d: int, winner: int, loser: int) -> np.ndarray:
    """B with lambda_old = B lambda_new: identity plus E[winner, loser]."""
    b = np.eye(d, dtype=np.int64)
    b[winner - 1, loser - 1] += 1
    return b


@dataclass(frozen=True)
class ZorichStep:
    iet: IntervalExchange
    step_type: str
    run_length: int
    transfer: np.ndarray  # accumulated integer B over the run
    log_shrink: float  # -log of the length-total ratio across the step


def zorich_step(iet: IntervalExchange, max_run: int = 10**7) -> ZorichStep:
    """Maximal run of same-type induction steps, renormalized for floats."""
    first = rauzy_step(iet)
    kind = first.step_type
    transfer = transfer_matrix(iet.d, first.winner, first.loser)
    cur = first.iet
    run = 1
    while run < max_run:
        nxt = rauzy_step(cur)
        if nxt.step_type != kind:
            break
        cur = nxt.iet
        transfer[nxt.winner - 1] += transfer[nxt.loser - 1]
        if transfer.max() >= _VISITATION_CAP:
            raise DomainError("visitation counts exceeded the integer guard")
        run += 1
    else:
        raise NonGenericIETError(f"run exceeded {max_run} steps; ratio is near-rational")
    lens = cur.lengths
    if all(_is_float_length(v) for v in lens):
        s = math.fsum(float(v) for v in lens)
        total0 = math.fsum(float(v) for v in iet.lengths)
        out = IntervalExchange(
            tuple(float(v) / s for v in lens), cur.top, cur.bottom
        )
        shrink = -math.log(s / total0)
    else:
        out = cur
        shrink = float(-math.log(float(cur.total() / iet.total())))
    return ZorichStep(
        iet=out, step_type=kind, run_length=run, transfer=transfer, log_shrink=shrink
    )


def zorich_run_lengths(iet: IntervalExchange, n_steps: int) -> list[int]:
    """Run lengths of the first n accelerated steps.

    For d = 2 these are the regular continued-fraction quotients of the
    ratio of the longer to the shorter interval.
    """
    out = []
    cur = iet
    for _ in range(n_steps):
        z = zorich_step(cur)
        out.append(z.run_length)
        cur = z.iet
    return out


# ---------------------------------------------------------------------------
# renormalization spectrum


@dataclass(frozen=True)
class ZorichSpectrum:
    """Exponents of the induction cocycle, normalized by accumulated
    log-shrink time so the top exponent of a generic orbit is 1."""

    exponents: tuple[float, ...]
    std_errors: tuple[float, ...]
    per_orbit: np.ndarray
    n_orbits_requested: int
    n_orbits_used: int
    n_steps: int
    converged: tuple[bool, ...]

    @property
    def top(self) -> float:
        return self.exponents[0]


def _dirichlet_lengths(stream: Stream, index: int, d: int) -> tuple[float, ...]:
    # uniform on the simplex: normalized exponentials of uniform variates
    width = 4 * (-(-d // 4))
    u = stream.uniform_items(index, 1, d, stride=width)[0]
    e = -np.log(u)
    return tuple(float(v) for v in e / math.fsum(e))


def _orbit_exponents(
    top: tuple[int, ...],
    bottom: tuple[int, ...],
    lengths: tuple[float, ...],
    n_steps: int,
) -> np.ndarray:
    d = len(lengths)
    iet = interval_exchange(lengths, bottom)
    if iet.top != top:
        raise ConfigurationError("spectrum orbits start from an identity top order")
    # The identity frame takes a few steps to align with the Oseledets flag;
    # logs accumulated during that transient bias every finite-time exponent
    # by O(1/T), which dominates the standard error on long runs.  Alignment
    # error decays exponentially, so a short discarded warmup removes it.
    warmup = min(64, n_steps // 8)
    frame = np.eye(d)
    logdiag = np.zeros(d)
    time_acc = 0.0
    cur = iet
    for step in range(n_steps):
        z = zorich_step(cur)
        cur = z.iet
        # lengths pull back by B, so covectors push forward by B^T
        frame = z.transfer.astype(np.float64).T @ frame
        q, r = np.linalg.qr(frame)
        diag = np.diagonal(r).copy()
        signs = np.where(diag < 0.0, -1.0, 1.0)
        q *= signs[None, :]
        diag *= signs
        if np.any(diag <= 0.0):
            raise NonGenericIETError("degenerate frame during QR renormalization")
        if step >= warmup:
            time_acc += z.log_shrink
            logdiag += np.log(diag)
        frame = q
    if time_acc <= 0.0:
        raise NonGenericIETError("no accumulated renormalization time")
    return logdiag / time_acc


def zorich_spectrum(
    permutation,
    stream: Stream,
    n_orbits: int,
    n_steps: int,
    min_survival: float = 0.9,
) -> ZorichSpectrum:
    """Lyapunov exponents of the accelerated-induction cocycle.

    Orbits start at independent uniformly distributed length vectors; the
    per-orbit exponents are QR-accumulated logs divided by the orbit's own
    renormalization time.  Orbits that hit a non-generic tie are dropped;
    the run aborts if fewer than ``min_survival`` of them survive.
    """
    bottom = tuple(int(p) for p in permutation)
    d = len(bottom)
    top = tuple(range(1, d + 1))
    if n_orbits < 2 or n_steps < 1:
        raise DomainError("need at least two orbits and one step")
    kept = []
    for i in range(n_orbits):
        lengths = _dirichlet_lengths(stream, i, d)
        try:
            kept.append(_orbit_exponents(top, bottom, lengths, n_steps))
        except NonGenericIETError:
            continue
    if len(kept) < max(2, int(math.ceil(min_survival * n_orbits))):
        raise DiagnosticError(
            f"only {len(kept)}/{n_orbits} induction orbits survived; "
            "the sampled lengths are too close to the non-generic locus"
        )
    per_orbit = np.asarray(kept)
    n_used = per_orbit.shape[0]
    means = per_orbit.mean(axis=0)
    ses = per_orbit.std(axis=0, ddof=1) / math.sqrt(n_used)
    half = n_used // 2
    converged = []
    for j in range(d):
        a, b = per_orbit[:half, j], per_orbit[half:, j]
        se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
        converged.append(bool(abs(a.mean() - b.mean()) <= 10.0 * max(se, 1e-300)))
    return ZorichSpectrum(
        exponents=tuple(float(v) for v in means),
        std_errors=tuple(float(v) for v in ses),
        per_orbit=per_orbit,
        n_orbits_requested=n_orbits,
        n_orbits_used=n_used,
        n_steps=n_steps,
        converged=tuple(converged),
    )
