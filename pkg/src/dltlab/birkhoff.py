"""Observables, normalizing schemes, and corrected Birkhoff sums.

The central object is the corrected sum

    S_N(x) = (sum_{n=0}^{N-1} f(T^n x) - A_N) / V_N

where the averaging sequence A_N and the normalizing sequence V_N come from
a :class:`NormalizingScheme` (law-of-large-numbers scaling A_N = N*mean,
V_N = N; central-limit scaling V_N = sqrt(N); or custom tables).

Accumulation is compensated (Kahan): orbit lengths up to 1e8 with
unit-scale terms would otherwise lose digits that the diagnostics care
about.  The reversed sum walks the inverse orbit; it satisfies

    S_N(x) = S_N^rev(T^{N-1} x)

exactly (the same multiset of summands), which is the cheap consistency
identity the acceptance tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    Batch,
    CompanionMap,
    PhaseSpaceSystem,
    Point,
    ShiftBatch,
    SymbolicPoint,
    TorusBatch,
    TorusPoint,
    apply_map,
    step_batch,
)
from .errors import ConfigurationError, DomainError, UnsupportedSystemError
from .laws import ReferenceLaw, dirac_law, gaussian_law

__all__ = [
    "Observable",
    "coordinate_cosine",
    "coordinate_symbol",
    "constant_observable",
    "NormalizingScheme",
    "lln_scheme",
    "clt_scheme",
    "birkhoff_sum",
    "corrected_sum",
    "reversed_corrected_sum",
    "corrected_sum_batch",
    "adaptedness_profile",
    "AdaptednessProfile",
]

_MAX_ORBIT = 10**8
_MAX_TABLE = 10**6
_SYMBOL_CHUNK = 2048  # inner column chunk for shift block sums


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class Observable:
    """A real observable with its exact mean and regularity constants.

    kinds: ``coordinate_cosine`` (cos(2 pi k.x) on the torus),
    ``coordinate_symbol`` (the symbol at a fixed window index, as a real),
    ``constant``.
    """

    kind: str
    frequency: tuple[int, ...] | None = None
    index: int | None = None
    value: float | None = None
    exact_mean: float = 0.0
    sup_bound: float = 0.0
    lipschitz_bound: float = 0.0

    def evaluate(self, x: Point) -> float:
        if self.kind == "coordinate_cosine":
            if not isinstance(x, TorusPoint):
                raise DomainError("coordinate_cosine acts on torus points")
            k = np.asarray(self.frequency, dtype=np.float64)
            return float(np.cos(2.0 * np.pi * float(k @ x.as_array())))
        if self.kind == "coordinate_symbol":
            if not isinstance(x, SymbolicPoint):
                raise DomainError("coordinate_symbol acts on symbolic points")
            return float(x.coordinate(self.index))
        return float(self.value)

    def evaluate_batch(self, batch: Batch) -> np.ndarray:
        if self.kind == "coordinate_cosine":
            if not isinstance(batch, TorusBatch):
                raise DomainError("coordinate_cosine acts on torus points")
            k = np.asarray(self.frequency, dtype=np.float64)
            c = batch.coords
            phase = k[0] * c[:, 0]
            for i in range(1, len(k)):
                phase = phase + k[i] * c[:, i]
            return np.cos(2.0 * np.pi * phase)
        if self.kind == "coordinate_symbol":
            if not isinstance(batch, ShiftBatch):
                raise DomainError("coordinate_symbol acts on symbolic points")
            return batch.symbol_block(self.index, self.index + 1)[:, 0].astype(np.float64)
        return np.full(len(batch), float(self.value))


def coordinate_cosine(frequency) -> Observable:
    k = tuple(int(v) for v in np.atleast_1d(frequency))
    norm = float(np.sqrt(sum(v * v for v in k)))
    return Observable(
        kind="coordinate_cosine",
        frequency=k,
        exact_mean=1.0 if norm == 0.0 else 0.0,
        sup_bound=1.0,
        lipschitz_bound=2.0 * np.pi * norm,
    )


def coordinate_symbol(sys: PhaseSpaceSystem, index: int = 0) -> Observable:
    if sys.kind != "two_sided_shift":
        raise ConfigurationError("coordinate_symbol needs a shift system")
    w = np.asarray(sys.weights)
    mean = float(np.sum(np.arange(len(w)) * w))
    top = float(len(w) - 1)
    # If two points agree to cylinder distance 2^-|index| they agree at the
    # index, so the modulus of continuity constant is (S-1) * 2^|index|.
    return Observable(
        kind="coordinate_symbol",
        index=int(index),
        exact_mean=mean,
        sup_bound=top,
        lipschitz_bound=top * 2.0 ** abs(int(index)),
    )


def constant_observable(value: float) -> Observable:
    v = float(value)
    return Observable(kind="constant", value=v, exact_mean=v, sup_bound=abs(v))


# ---------------------------------------------------------------------------
# normalizing schemes


@dataclass(frozen=True)
class NormalizingScheme:
    """Averaging and normalizing sequences plus the reference law.

    averaging: 'mean' (A_N = N * mean), 'zero', or 'table';
    normalizing: 'linear' (V_N = N), 'sqrt' (V_N = sqrt(N)), or 'table'.
    """

    averaging: str
    normalizing: str
    law: ReferenceLaw
    mean: float = 0.0
    averaging_table: tuple[float, ...] = ()
    normalizing_table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.averaging not in ("mean", "zero", "table"):
            raise ConfigurationError(f"unknown averaging rule {self.averaging!r}")
        if self.normalizing not in ("linear", "sqrt", "table"):
            raise ConfigurationError(f"unknown normalizing rule {self.normalizing!r}")
        for name, table in (
            ("averaging", self.averaging_table),
            ("normalizing", self.normalizing_table),
        ):
            if len(table) > _MAX_TABLE:
                raise ConfigurationError(f"{name} table longer than {_MAX_TABLE}")
        if self.averaging == "table" and not self.averaging_table:
            raise ConfigurationError("averaging 'table' needs a table")
        if self.normalizing == "table":
            if not self.normalizing_table:
                raise ConfigurationError("normalizing 'table' needs a table")
            if any(v <= 0 for v in self.normalizing_table):
                raise ConfigurationError("normalizing table must be positive")

    def a_value(self, n: int) -> float:
        if self.averaging == "mean":
            return n * self.mean
        if self.averaging == "zero":
            return 0.0
        if n < 1 or n > len(self.averaging_table):
            raise DomainError(f"averaging table has no entry for N={n}")
        return float(self.averaging_table[n - 1])

    def v_value(self, n: int) -> float:
        if n < 1:
            raise DomainError("normalizing sequence needs N >= 1")
        if self.normalizing == "linear":
            return float(n)
        if self.normalizing == "sqrt":
            return float(np.sqrt(n))
        if n > len(self.normalizing_table):
            raise DomainError(f"normalizing table has no entry for N={n}")
        return float(self.normalizing_table[n - 1])


def lln_scheme(mean: float) -> NormalizingScheme:
    """Law-of-large-numbers scaling: S_N concentrates at zero."""
    return NormalizingScheme(
        averaging="mean", normalizing="linear", law=dirac_law(), mean=float(mean)
    )


def clt_scheme(mean: float, variance: float) -> NormalizingScheme:
    """Central-limit scaling with a centered gaussian reference law."""
    return NormalizingScheme(
        averaging="mean", normalizing="sqrt", law=gaussian_law(variance), mean=float(mean)
    )


# ---------------------------------------------------------------------------
# sums


def _kahan_add(s: float, c: float, v: float) -> tuple[float, float]:
    y = v - c
    t = s + y
    c = (t - s) - y
    return t, c


def birkhoff_sum(sys: PhaseSpaceSystem, f: Observable, x: Point, n_steps: int) -> float:
    """sum_{n=0}^{N-1} f(T^n x), compensated."""
    if n_steps < 0 or n_steps > _MAX_ORBIT:
        raise DomainError(f"orbit length must be in [0, {_MAX_ORBIT}]")
    if sys.kind == "two_sided_shift" and f.kind == "coordinate_symbol":
        # contiguous counter block; symbol sums are exact in int64
        if not isinstance(x, SymbolicPoint):
            raise DomainError("shift systems act on symbolic points")
        total = 0
        j = f.index
        for start in range(0, n_steps, _SYMBOL_CHUNK * 64):
            stop = min(n_steps, start + _SYMBOL_CHUNK * 64)
            total += int(np.sum(x.coordinates(j + start, j + stop)))
        return float(total)
    s, c = 0.0, 0.0
    y = x
    for _ in range(n_steps):
        s, c = _kahan_add(s, c, f.evaluate(y))
        y = apply_map(sys, y, 1)
    return s


def corrected_sum(
    sys: PhaseSpaceSystem, f: Observable, x: Point, n_steps: int, scheme: NormalizingScheme
) -> float:
    """(Birkhoff sum - A_N) / V_N."""
    return (birkhoff_sum(sys, f, x, n_steps) - scheme.a_value(n_steps)) / scheme.v_value(
        n_steps
    )


def reversed_corrected_sum(
    sys: PhaseSpaceSystem, f: Observable, x: Point, n_steps: int, scheme: NormalizingScheme
) -> float:
    """Same normalization over the inverse orbit: sums f(T^-n x), n = 0..N-1."""
    if n_steps < 0 or n_steps > _MAX_ORBIT:
        raise DomainError(f"orbit length must be in [0, {_MAX_ORBIT}]")
    if sys.kind == "two_sided_shift" and f.kind == "coordinate_symbol":
        if not isinstance(x, SymbolicPoint):
            raise DomainError("shift systems act on symbolic points")
        total = 0
        j = f.index
        for start in range(0, n_steps, _SYMBOL_CHUNK * 64):
            stop = min(n_steps, start + _SYMBOL_CHUNK * 64)
            total += int(np.sum(x.coordinates(j - (stop - 1), j - start + 1)))
        s = float(total)
    else:
        s, c = 0.0, 0.0
        y = x
        for _ in range(n_steps):
            s, c = _kahan_add(s, c, f.evaluate(y))
            y = apply_map(sys, y, -1)
    return (s - scheme.a_value(n_steps)) / scheme.v_value(n_steps)


def corrected_sum_batch(
    sys: PhaseSpaceSystem,
    f: Observable,
    batch: Batch,
    n_steps: int,
    scheme: NormalizingScheme,
) -> tuple[np.ndarray, Batch]:
    """S_N for every orbit in the batch; returns (values, terminal batch).

    The batch is consumed (stepped in place to time N).  Per-orbit results
    are bitwise identical to scalar evaluation and independent of how the
    caller chunked the samples.
    """
    if n_steps < 1 or n_steps > _MAX_ORBIT:
        raise DomainError(f"orbit length must be in [1, {_MAX_ORBIT}]")
    n = len(batch)
    if isinstance(batch, ShiftBatch) and f.kind == "coordinate_symbol":
        totals = np.zeros(n, dtype=np.int64)
        j = f.index
        for start in range(0, n_steps, _SYMBOL_CHUNK):
            stop = min(n_steps, start + _SYMBOL_CHUNK)
            block = batch.symbol_block(j + start, j + stop)
            totals += np.sum(block, axis=1)
        step_batch(batch, n_steps)
        sums = totals.astype(np.float64)
    elif f.kind == "constant":
        step_batch(batch, n_steps)
        sums = np.full(n, n_steps * float(f.value))
    else:
        sums = np.zeros(n)
        comp = np.zeros(n)
        for _ in range(n_steps):
            v = f.evaluate_batch(batch)
            # elementwise Kahan across the time axis
            y = v - comp
            t = sums + y
            comp = (t - sums) - y
            sums = t
            step_batch(batch, 1)
    values = (sums - scheme.a_value(n_steps)) / scheme.v_value(n_steps)
    return values, batch


# ---------------------------------------------------------------------------
# companion adaptedness


@dataclass(frozen=True)
class AdaptednessProfile:
    """Cumulative observable discrepancy along a companion pair.

    deviations[N] = sum_{n=0}^{N} |f(T^n U x) - f(T^n x)| (inclusive upper
    limit).  ratios[N] = deviations[N] / V_N for N >= 1 when a scheme is
    supplied.  ``bounded`` flags a flat running tail: the last decade of the
    profile grew by no more than 1% (strongly contracting pairs with
    Lipschitz observables should converge outright).
    """

    deviations: tuple[float, ...]
    ratios: tuple[float, ...] | None
    tail_increase: float
    bounded: bool


def adaptedness_profile(
    sys: PhaseSpaceSystem,
    f: Observable,
    comp: CompanionMap,
    x: Point,
    n_max: int,
    scheme: NormalizingScheme | None = None,
) -> AdaptednessProfile:
    if sys.kind == "two_sided_shift":
        raise UnsupportedSystemError("companion diagnostics need a torus system")
    if n_max < 1 or n_max > 10**4:
        raise DomainError("n_max must be in [1, 1e4]")
    from . import orbitpair

    pair = orbitpair.paired_orbit(sys, comp, x, n_max)
    fx = f.evaluate_batch(TorusBatch(sys, pair.base))
    fy = f.evaluate_batch(TorusBatch(sys, pair.companion))
    dev = np.cumsum(np.abs(fy - fx))
    ratios = None
    if scheme is not None:
        ratios = tuple(
            float(dev[n] / scheme.v_value(n)) for n in range(1, n_max + 1)
        )
    cut = int(0.9 * len(dev))
    tail_increase = float(dev[-1] - dev[cut])
    bounded = tail_increase <= max(1e-9, 0.01 * max(1e-12, float(dev[-1])))
    return AdaptednessProfile(
        deviations=tuple(float(v) for v in dev),
        ratios=ratios,
        tail_increase=tail_increase,
        bounded=bounded,
    )
