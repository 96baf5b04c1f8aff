"""Monte Carlo checks of plain, conditional, and mixing limit theorems.

Every estimator draws i.i.d. initial conditions from the invariant measure,
forms the normalized sums S_N = (sum - A_N) / V_N (Birkhoff sums for an
observable, log expansions for a cocycle), and compares their empirical
distribution to the scheme's reference law:

    plain        mu(S_N in (a,b))              vs  P(S in (a,b))
    conditional  mu(x in A and S_N in (a,b))   vs  mu(A) P(S in (a,b))
    mixing       ... and T^N x in B            vs  mu(A) P(S in (a,b)) mu(B)

Sample generation is data-parallel over sample indices: chunk i always
covers the same index range and every variate is a pure function of
(seed, stream path, index), so worker count and chunking never change a
report.  Events carry exact masses and consume no randomness, which keeps
full-space reductions exact: the conditional estimator with A = X produces
bit-identical numbers to the plain interval mass on the same seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special as sp_special

from .birkhoff import NormalizingScheme, Observable, corrected_sum_batch
from .cocycle import (
    MatrixCocycle,
    Section,
    sample_directions,
    sigma_norm_batch,
    sigma_vec_batch,
)
from .dynamics import (
    Batch,
    PhaseSpaceSystem,
    ShiftBatch,
    TorusBatch,
    sample_batch,
    step_batch,
)
from .errors import ConfigurationError, DomainError
from .laws import ReferenceLaw
from .streams import Stream

__all__ = [
    "EmpiricalDistribution",
    "empirical_from_values",
    "ks_distance",
    "Interval",
    "interval",
    "law_mass",
    "Event",
    "torus_box",
    "shift_cylinder",
    "full_space",
    "projective_cap",
    "ObservableSource",
    "CocycleVectorSource",
    "OperatorNormSource",
    "SectionSource",
    "DltPoint",
    "PlainDltResult",
    "estimate_plain_dlt",
    "ConditionalDltResult",
    "estimate_conditional_dlt",
    "MixingDltResult",
    "estimate_mixing_dlt",
    "operator_norm_dlt",
    "section_dlt",
    "CorrelationPoint",
    "MixingCorrelationResult",
    "estimate_mixing_correlation",
    "CharFnResult",
    "char_fn_estimate",
    "GreenKuboResult",
    "variance_green_kubo",
]

_CHUNK = 4096
_MIN_SAMPLES = 100
_MAX_LAG = 1000
_DEFAULT_TOLERANCE_FLOOR = 0.02
_DEFAULT_TOLERANCE_SES = 5.0


# ---------------------------------------------------------------------------
# empirical distributions and the KS distance


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted sample collection with a right-continuous ecdf."""

    samples: np.ndarray

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    def cdf_at(self, t: float) -> float:
        return float(np.searchsorted(self.samples, t, side="right")) / self.count


def empirical_from_values(values) -> EmpiricalDistribution:
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size < 1:
        raise DomainError("empirical distribution needs at least one sample")
    if np.any(np.isnan(arr)):
        raise DomainError("samples contain NaN")
    return EmpiricalDistribution(samples=arr)


def _law_cdf_two_sided(law: ReferenceLaw, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(cdf just below u, cdf at u) for the reference law."""
    if law.is_atomic_at_zero:
        return (u > 0.0).astype(np.float64), (u >= 0.0).astype(np.float64)
    if law.kind == "gaussian":
        ref = sp_special.ndtr(u / math.sqrt(law.variance))
        return ref, ref
    if law.kind == "empirical":
        ref = np.sort(np.asarray(law.samples, dtype=np.float64))
        m = ref.shape[0]
        below = np.searchsorted(ref, u, side="left") / m
        at = np.searchsorted(ref, u, side="right") / m
        return below, at
    raise ConfigurationError(f"unknown law kind {law.kind!r}")


def ks_distance(emp: EmpiricalDistribution, law: ReferenceLaw) -> float:
    """sup_t |ecdf(t) - law cdf(t)|.

    Both cdfs are step functions or continuous, so the supremum is attained
    at a jump point of one of them, approached from either side.  Jump
    points are scanned as the union of the distinct sample values and the
    law's own jumps (the atom at 0, or the reference samples); evaluating
    each candidate from both sides makes the scan exact even when the
    samples carry ties.
    """
    xs = emp.samples
    n = emp.count
    candidates = [np.unique(xs)]
    if law.is_atomic_at_zero:
        candidates.append(np.array([0.0]))
    elif law.kind == "empirical":
        candidates.append(np.unique(np.asarray(law.samples, dtype=np.float64)))
    u = np.unique(np.concatenate(candidates))
    emp_below = np.searchsorted(xs, u, side="left") / n
    emp_at = np.searchsorted(xs, u, side="right") / n
    law_below, law_at = _law_cdf_two_sided(law, u)
    return float(
        max(np.max(np.abs(emp_at - law_at)), np.max(np.abs(emp_below - law_below)))
    )


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class Interval:
    """Open interval (a, b); endpoints may be infinite."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ConfigurationError("interval needs a < b")

    def validate_for(self, law: ReferenceLaw) -> None:
        # the reference laws here have atoms only at 0 (degenerate case)
        if law.is_atomic_at_zero and (self.a == 0.0 or self.b == 0.0):
            raise DomainError(
                "interval endpoint sits on the law's atom at 0; "
                "the boundary must carry no mass"
            )

    def contains(self, values: np.ndarray) -> np.ndarray:
        return (values > self.a) & (values < self.b)


def interval(a: float, b: float) -> Interval:
    return Interval(a=float(a), b=float(b))


def law_mass(law: ReferenceLaw, iv: Interval) -> float:
    """P(S in (a,b)) for the reference law."""
    iv.validate_for(law)
    return law.mass(iv.a, iv.b)


# ---------------------------------------------------------------------------
# events with exact masses


@dataclass(frozen=True)
class Event:
    """Deterministic membership predicate with an exactly known mass.

    kinds: full_space, torus_box (product of half-open coordinate
    intervals), shift_cylinder (pinned symbols on a window), and
    projective_cap (angular cap around a direction, for the projective
    factor of cocycle sampling).
    """

    kind: str
    exact_mass: float
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    first_index: int = 0
    symbols: tuple[int, ...] | None = None
    center: tuple[float, ...] | None = None
    angle: float = 0.0

    def member(self, batch: Batch, dirs: np.ndarray | None) -> np.ndarray:
        if self.kind == "full_space":
            return np.ones(len(batch), dtype=bool)
        if self.kind == "torus_box":
            if not isinstance(batch, TorusBatch):
                raise DomainError("torus_box events need torus points")
            c = batch.coords
            ok = np.ones(len(batch), dtype=bool)
            for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
                ok &= (c[:, i] >= lo) & (c[:, i] < hi)
            return ok
        if self.kind == "shift_cylinder":
            if not isinstance(batch, ShiftBatch):
                raise DomainError("shift_cylinder events need symbolic points")
            block = batch.symbol_block(
                self.first_index, self.first_index + len(self.symbols)
            )
            want = np.asarray(self.symbols, dtype=np.int64)
            return np.all(block == want[None, :], axis=1)
        if self.kind == "projective_cap":
            if dirs is None:
                raise DomainError("projective_cap events need direction samples")
            center = np.asarray(self.center)
            dots = np.abs(dirs @ center)
            return dots >= math.cos(self.angle) - 1e-15
        raise ConfigurationError(f"unknown event kind {self.kind!r}")


def full_space() -> Event:
    return Event(kind="full_space", exact_mass=1.0)


def torus_box(lower, upper) -> Event:
    lo = tuple(float(v) for v in lower)
    hi = tuple(float(v) for v in upper)
    if len(lo) != len(hi):
        raise ConfigurationError("box bounds must have the same length")
    mass = 1.0
    for a, b in zip(lo, hi):
        if not (0.0 <= a < b <= 1.0):
            raise ConfigurationError("box needs 0 <= lower < upper <= 1 per coordinate")
        mass *= b - a
    return Event(kind="torus_box", exact_mass=mass, lower=lo, upper=hi)


def shift_cylinder(sys: PhaseSpaceSystem, first_index: int, symbols) -> Event:
    if sys.kind != "two_sided_shift":
        raise ConfigurationError("cylinder events need a shift system")
    syms = tuple(int(s) for s in symbols)
    if not syms:
        raise ConfigurationError("cylinder needs at least one pinned symbol")
    w = sys.weights
    mass = 1.0
    for s in syms:
        if not (0 <= s < len(w)):
            raise ConfigurationError("cylinder symbol outside the alphabet")
        mass *= w[s]
    return Event(
        kind="shift_cylinder",
        exact_mass=mass,
        first_index=int(first_index),
        symbols=syms,
    )


def projective_cap(center, angular_radius: float) -> Event:
    """Directions within ``angular_radius`` of +-center in projective space.

    Mass under the rotation-invariant measure: the polar angle psi against
    a fixed axis has density proportional to sin^(m-2), so
    P(psi <= theta) is the regularized incomplete beta I(sin^2 theta;
    (m-1)/2, 1/2) after folding antipodes.
    """
    c = np.asarray(center, dtype=np.float64)
    norm = float(np.linalg.norm(c))
    if norm == 0.0:
        raise ConfigurationError("cap center must be nonzero")
    theta = float(angular_radius)
    if not (0.0 < theta <= math.pi / 2):
        raise ConfigurationError("angular radius must be in (0, pi/2]")
    m = c.shape[0]
    mass = float(sp_special.betainc((m - 1) / 2.0, 0.5, math.sin(theta) ** 2))
    return Event(
        kind="projective_cap",
        exact_mass=mass,
        center=tuple(float(v) for v in c / norm),
        angle=theta,
    )


# ---------------------------------------------------------------------------
# sample sources: normalized sums over fresh initial conditions


@dataclass(frozen=True)
class ObservableSource:
    """S_N from Birkhoff sums of an observable."""

    sys: PhaseSpaceSystem
    observable: Observable
    scheme: NormalizingScheme

    uses_directions = False
    dump_header = "S_N"

    def chunk(self, stream: Stream, first: int, count: int, n_steps: int):
        batch = sample_batch(self.sys, stream.child("points"), first, count)
        initial = batch.copy()
        values, terminal = corrected_sum_batch(
            self.sys, self.observable, batch, n_steps, self.scheme
        )
        return values, initial, None, terminal, None

    def dump_values(self, stream: Stream, first: int, count: int, n_steps: int):
        return self.chunk(stream, first, count, n_steps)[0]


@dataclass(frozen=True)
class CocycleVectorSource:
    """S_N from vector log-expansions, sampled on base x direction space."""

    coc: MatrixCocycle
    scheme: NormalizingScheme

    uses_directions = True
    dump_header = "sigma"

    def chunk(self, stream: Stream, first: int, count: int, n_steps: int):
        batch = sample_batch(self.coc.sys, stream.child("points"), first, count)
        dirs = sample_directions(stream.child("directions"), first, count, self.coc.dim)
        initial = batch.copy()
        sig, terminal, out_dirs = sigma_vec_batch(self.coc, batch, dirs, n_steps)
        values = (sig - self.scheme.a_value(n_steps)) / self.scheme.v_value(n_steps)
        return values, initial, dirs, terminal, out_dirs

    def dump_values(self, stream: Stream, first: int, count: int, n_steps: int):
        batch = sample_batch(self.coc.sys, stream.child("points"), first, count)
        dirs = sample_directions(stream.child("directions"), first, count, self.coc.dim)
        sig, _, _ = sigma_vec_batch(self.coc, batch, dirs, n_steps)
        return sig


@dataclass(frozen=True)
class OperatorNormSource:
    """S_N from operator-norm log-expansions sigma(x, N)."""

    coc: MatrixCocycle
    scheme: NormalizingScheme

    uses_directions = False
    dump_header = "sigma"

    def chunk(self, stream: Stream, first: int, count: int, n_steps: int):
        sig, initial, terminal = self._sigma_chunk(stream, first, count, n_steps)
        values = (sig - self.scheme.a_value(n_steps)) / self.scheme.v_value(n_steps)
        return values, initial, None, terminal, None

    def _sigma_chunk(self, stream: Stream, first: int, count: int, n_steps: int):
        batch = sample_batch(self.coc.sys, stream.child("points"), first, count)
        initial = batch.copy()
        if self.coc.dim == 1:
            # 1 x 1 products: |C| equals |C e_1|; route through the vector
            # kernel so the two estimators agree bit for bit
            ones = np.ones((count, 1))
            sig, terminal, _ = sigma_vec_batch(self.coc, batch, ones, n_steps)
        else:
            sig, terminal = sigma_norm_batch(self.coc, batch, n_steps)
        return sig, initial, terminal

    def dump_values(self, stream: Stream, first: int, count: int, n_steps: int):
        return self._sigma_chunk(stream, first, count, n_steps)[0]


@dataclass(frozen=True)
class SectionSource:
    """S_N from sigma(x, s(x), N) for a direction field s."""

    coc: MatrixCocycle
    section: Section
    scheme: NormalizingScheme

    uses_directions = False
    dump_header = "sigma"

    def chunk(self, stream: Stream, first: int, count: int, n_steps: int):
        batch = sample_batch(self.coc.sys, stream.child("points"), first, count)
        initial = batch.copy()
        dirs = self.section.at_batch(initial)
        sig, terminal, out_dirs = sigma_vec_batch(self.coc, batch, dirs, n_steps)
        values = (sig - self.scheme.a_value(n_steps)) / self.scheme.v_value(n_steps)
        return values, initial, dirs, terminal, out_dirs

    def dump_values(self, stream: Stream, first: int, count: int, n_steps: int):
        batch = sample_batch(self.coc.sys, stream.child("points"), first, count)
        dirs = self.section.at_batch(batch.copy())
        sig, _, _ = sigma_vec_batch(self.coc, batch, dirs, n_steps)
        return sig


def _chunk_ranges(n: int) -> list[tuple[int, int]]:
    return [(i, min(_CHUNK, n - i)) for i in range(0, n, _CHUNK)]


def _collect(
    source,
    stream: Stream,
    n_steps: int,
    n_samples: int,
    event_a: Event | None,
    event_b: Event | None,
    workers: int,
):
    """Values plus event memberships, chunked by sample index.

    Chunks write disjoint slices of preallocated arrays, so the execution
    order (and worker count) cannot affect the result.
    """
    values = np.empty(n_samples)
    in_a = np.ones(n_samples, dtype=bool) if event_a else None
    in_b = np.ones(n_samples, dtype=bool) if event_b else None

    def work(rng):
        first, count = rng
        vals, initial, dirs, terminal, out_dirs = source.chunk(
            stream, first, count, n_steps
        )
        values[first : first + count] = vals
        if event_a is not None:
            in_a[first : first + count] = event_a.member(initial, dirs)
        if event_b is not None:
            in_b[first : first + count] = event_b.member(terminal, out_dirs)

    ranges = _chunk_ranges(n_samples)
    if workers <= 1:
        for rng in ranges:
            work(rng)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, ranges))
    return values, in_a, in_b


def _binomial_se(p_hat: float, n: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)


def _default_tolerance(se: float) -> float:
    return max(_DEFAULT_TOLERANCE_FLOOR, _DEFAULT_TOLERANCE_SES * se)


# ---------------------------------------------------------------------------
# plain DLT


@dataclass(frozen=True)
class DltPoint:
    n_steps: int
    ks: float
    n_samples: int
    empirical: EmpiricalDistribution


@dataclass(frozen=True)
class PlainDltResult:
    """Per-N KS distances to the reference law plus a trend summary.

    ``trend`` compares the first and last KS values against a 2/sqrt(n)
    sampling allowance: 'improving' means the distance dropped by more
    than the allowance, 'worsening' that it rose by more, 'flat' otherwise.
    """

    points: tuple[DltPoint, ...]
    trend: str

    @property
    def final_ks(self) -> float:
        return self.points[-1].ks


def estimate_plain_dlt(
    source, n_list, n_samples: int, stream: Stream, workers: int = 1
) -> PlainDltResult:
    if n_samples < _MIN_SAMPLES:
        raise DomainError(f"need at least {_MIN_SAMPLES} samples")
    ns = [int(n) for n in n_list]
    if not ns or any(n < 1 for n in ns):
        raise DomainError("N list must contain positive orbit lengths")
    points = []
    for n_steps in ns:
        sub = stream.child(f"n{n_steps}")
        values, _, _ = _collect(source, sub, n_steps, n_samples, None, None, workers)
        emp = empirical_from_values(values)
        points.append(
            DltPoint(
                n_steps=n_steps,
                ks=ks_distance(emp, source.scheme.law),
                n_samples=n_samples,
                empirical=emp,
            )
        )
    allowance = 2.0 / math.sqrt(n_samples)
    delta = points[-1].ks - points[0].ks
    if len(points) < 2 or abs(delta) <= allowance:
        trend = "flat"
    else:
        trend = "improving" if delta < 0 else "worsening"
    return PlainDltResult(points=tuple(points), trend=trend)


# ---------------------------------------------------------------------------
# conditional and mixing DLTs


@dataclass(frozen=True)
class ConditionalDltResult:
    estimate: float
    target: float
    deviation: float
    std_error: float
    tolerance: float
    passed: bool
    n_steps: int
    n_samples: int
    mass_a: float
    law_mass: float


def estimate_conditional_dlt(
    source,
    event_a: Event,
    iv: Interval,
    n_steps: int,
    n_samples: int,
    stream: Stream,
    workers: int = 1,
    tolerance: float | None = None,
) -> ConditionalDltResult:
    """mu(x in A and S_N in (a,b)) against mu(A) P(S in (a,b))."""
    if n_samples < _MIN_SAMPLES:
        raise DomainError(f"need at least {_MIN_SAMPLES} samples")
    if event_a.exact_mass <= 0.0:
        raise DomainError("conditioning event has zero mass")
    target_mass = law_mass(source.scheme.law, iv)
    sub = stream.child(f"n{int(n_steps)}")
    values, in_a, _ = _collect(source, sub, n_steps, n_samples, event_a, None, workers)
    hits = in_a & iv.contains(values)
    est = float(np.count_nonzero(hits)) / n_samples
    target = event_a.exact_mass * target_mass
    se = _binomial_se(est, n_samples)
    tol = _default_tolerance(se) if tolerance is None else tolerance
    dev = abs(est - target)
    return ConditionalDltResult(
        estimate=est,
        target=target,
        deviation=dev,
        std_error=se,
        tolerance=tol,
        passed=bool(dev <= tol),
        n_steps=int(n_steps),
        n_samples=n_samples,
        mass_a=event_a.exact_mass,
        law_mass=target_mass,
    )


@dataclass(frozen=True)
class MixingDltResult:
    estimate: float
    target: float
    deviation: float
    std_error: float
    tolerance: float
    passed: bool
    n_steps: int
    n_samples: int
    mass_a: float
    mass_b: float
    law_mass: float
    companion_missing: bool


def estimate_mixing_dlt(
    source,
    event_a: Event,
    event_b: Event,
    iv: Interval,
    n_steps: int,
    n_samples: int,
    stream: Stream,
    workers: int = 1,
    tolerance: float | None = None,
    companion=None,
) -> MixingDltResult:
    """mu(x in A, S_N in (a,b), T^N x in B) against the triple product.

    A missing companion map does not block the estimate, but the report
    flags that the pair hypotheses were never checkable.
    """
    if n_samples < _MIN_SAMPLES:
        raise DomainError(f"need at least {_MIN_SAMPLES} samples")
    if event_a.exact_mass <= 0.0 or event_b.exact_mass <= 0.0:
        raise DomainError("mixing events must have positive mass")
    missing = companion is None
    target_mass = law_mass(source.scheme.law, iv)
    sub = stream.child(f"n{int(n_steps)}")
    values, in_a, in_b = _collect(
        source, sub, n_steps, n_samples, event_a, event_b, workers
    )
    hits = in_a & iv.contains(values) & in_b
    est = float(np.count_nonzero(hits)) / n_samples
    target = event_a.exact_mass * target_mass * event_b.exact_mass
    se = _binomial_se(est, n_samples)
    tol = _default_tolerance(se) if tolerance is None else tolerance
    dev = abs(est - target)
    return MixingDltResult(
        estimate=est,
        target=target,
        deviation=dev,
        std_error=se,
        tolerance=tol,
        passed=bool(dev <= tol),
        n_steps=int(n_steps),
        n_samples=n_samples,
        mass_a=event_a.exact_mass,
        mass_b=event_b.exact_mass,
        law_mass=target_mass,
        companion_missing=missing,
    )


# ---------------------------------------------------------------------------
# mixing correlations


@dataclass(frozen=True)
class CorrelationPoint:
    n_steps: int
    estimate: float
    target: float
    deviation: float
    std_error: float


@dataclass(frozen=True)
class MixingCorrelationResult:
    points: tuple[CorrelationPoint, ...]
    n_samples: int


def estimate_mixing_correlation(
    sys: PhaseSpaceSystem,
    event_a: Event,
    event_b: Event,
    n_list,
    n_samples: int,
    stream: Stream,
    workers: int = 1,
) -> MixingCorrelationResult:
    """mu(A intersect T^-N B) against mu(A) mu(B), per N."""
    if n_samples < _MIN_SAMPLES:
        raise DomainError(f"need at least {_MIN_SAMPLES} samples")
    target = event_a.exact_mass * event_b.exact_mass
    points = []
    for n_steps in (int(n) for n in n_list):
        sub = stream.child(f"n{n_steps}")
        chunk_counts = np.zeros(len(_chunk_ranges(n_samples)), dtype=np.int64)

        def work(item):
            ci, (first, count) = item
            batch = sample_batch(sys, sub.child("points"), first, count)
            members_a = event_a.member(batch, None)
            if n_steps:
                step_batch(batch, n_steps)
            members_b = event_b.member(batch, None)
            chunk_counts[ci] = np.count_nonzero(members_a & members_b)

        items = list(enumerate(_chunk_ranges(n_samples)))
        if workers <= 1:
            for item in items:
                work(item)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(work, items))
        est = float(chunk_counts.sum()) / n_samples
        se = _binomial_se(est, n_samples)
        points.append(
            CorrelationPoint(
                n_steps=n_steps,
                estimate=est,
                target=target,
                deviation=abs(est - target),
                std_error=se,
            )
        )
    return MixingCorrelationResult(points=tuple(points), n_samples=n_samples)


# ---------------------------------------------------------------------------
# characteristic-function route


@dataclass(frozen=True)
class CharFnResult:
    estimate: complex
    target: complex
    deviation: float
    se_real: float
    se_imag: float
    t: float
    n_steps: int
    n_samples: int


def char_fn_estimate(
    source,
    t: float,
    weight,
    n_steps: int,
    n_samples: int,
    stream: Stream,
    workers: int = 1,
) -> CharFnResult:
    """E[exp(i t S_N) phi(T^N x)] against E[exp(i t S)] mu(phi).

    ``weight`` is an Event (indicator) or an Observable evaluated at the
    terminal point.  At t = 0 the estimate is exactly the sampled mean of
    phi: the same samples, with the exponential factor identically 1.
    """
    if abs(t) > 100.0:
        raise DomainError("|t| must be at most 100")
    if n_samples < _MIN_SAMPLES:
        raise DomainError(f"need at least {_MIN_SAMPLES} samples")
    sub = stream.child(f"n{int(n_steps)}")
    re = np.empty(n_samples)
    im = np.empty(n_samples)

    def work(rng):
        first, count = rng
        vals, initial, dirs, terminal, out_dirs = source.chunk(
            sub, first, count, n_steps
        )
        if isinstance(weight, Event):
            phi = weight.member(terminal, out_dirs).astype(np.float64)
            phi_mean = weight.exact_mass
        else:
            phi = weight.evaluate_batch(terminal)
            phi_mean = weight.exact_mean
        if t == 0.0:
            re[first : first + count] = phi
            im[first : first + count] = 0.0
        else:
            re[first : first + count] = np.cos(t * vals) * phi
            im[first : first + count] = np.sin(t * vals) * phi
        return phi_mean

    ranges = _chunk_ranges(n_samples)
    if workers <= 1:
        phi_means = [work(rng) for rng in ranges]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            phi_means = list(pool.map(work, ranges))
    phi_mean = phi_means[0]
    target = source.scheme.law.char_fn(t) * phi_mean
    est = complex(float(np.mean(re)), float(np.mean(im)))
    se_r = float(np.std(re, ddof=1)) / math.sqrt(n_samples)
    se_i = float(np.std(im, ddof=1)) / math.sqrt(n_samples)
    return CharFnResult(
        estimate=est,
        target=complex(target),
        deviation=abs(est - complex(target)),
        se_real=se_r,
        se_imag=se_i,
        t=float(t),
        n_steps=int(n_steps),
        n_samples=n_samples,
    )


# ---------------------------------------------------------------------------
# named wrappers for the norm- and section-driven routes


def _dlt_dispatch(
    source,
    stream: Stream,
    n_list,
    n_samples: int,
    event_a: Event | None,
    event_b: Event | None,
    iv: Interval | None,
    workers: int,
    tolerance: float | None,
):
    ns = [int(n) for n in (n_list if np.iterable(n_list) else [n_list])]
    if event_a is None and event_b is None:
        return estimate_plain_dlt(source, ns, n_samples, stream, workers)
    if iv is None:
        raise ConfigurationError("event-conditioned estimates need an interval")
    if len(ns) != 1:
        raise ConfigurationError("event-conditioned estimates take a single N")
    if event_b is None:
        return estimate_conditional_dlt(
            source, event_a, iv, ns[0], n_samples, stream, workers, tolerance
        )
    if event_a is None:
        raise ConfigurationError("a terminal event needs an initial event (use full_space)")
    return estimate_mixing_dlt(
        source, event_a, event_b, iv, ns[0], n_samples, stream, workers, tolerance
    )


def operator_norm_dlt(
    coc: MatrixCocycle,
    scheme: NormalizingScheme,
    n_list,
    n_samples: int,
    stream: Stream,
    event_a: Event | None = None,
    event_b: Event | None = None,
    iv: Interval | None = None,
    workers: int = 1,
    tolerance: float | None = None,
):
    """Plain / conditional / mixing DLT with S_N built from sigma(x, N)."""
    return _dlt_dispatch(
        OperatorNormSource(coc, scheme),
        stream,
        n_list,
        n_samples,
        event_a,
        event_b,
        iv,
        workers,
        tolerance,
    )


def section_dlt(
    coc: MatrixCocycle,
    scheme: NormalizingScheme,
    section: Section,
    n_list,
    n_samples: int,
    stream: Stream,
    event_a: Event | None = None,
    event_b: Event | None = None,
    iv: Interval | None = None,
    workers: int = 1,
    tolerance: float | None = None,
):
    """Plain / conditional / mixing DLT with S_N built from sigma(x, s(x), N)."""
    return _dlt_dispatch(
        SectionSource(coc, section, scheme),
        stream,
        n_list,
        n_samples,
        event_a,
        event_b,
        iv,
        workers,
        tolerance,
    )


# ---------------------------------------------------------------------------
# Green-Kubo variance


@dataclass(frozen=True)
class GreenKuboResult:
    """Truncated autocovariance series for the CLT variance.

    variance = Cov(0) + 2 sum_{lag=1..lag_max} Cov(lag), with exact-mean
    subtraction.  ``tail_fraction`` is the absolute contribution of the
    final decade of lags relative to the variance; above 1% the truncation
    is suspect and ``tail_ok`` goes false (increase lag_max or samples).
    """

    variance: float
    variance_raw: float
    lag_covariances: tuple[float, ...]
    tail_fraction: float
    tail_ok: bool
    clamped: bool
    lag_max: int
    n_samples: int


def variance_green_kubo(
    sys: PhaseSpaceSystem,
    f: Observable,
    lag_max: int,
    n_samples: int,
    stream: Stream,
    workers: int = 1,
) -> GreenKuboResult:
    if lag_max < 1 or lag_max > _MAX_LAG:
        raise DomainError(f"lag_max must be in [1, {_MAX_LAG}]")
    if n_samples < _MIN_SAMPLES:
        raise DomainError(f"need at least {_MIN_SAMPLES} samples")
    mean = f.exact_mean
    ranges = _chunk_ranges(n_samples)
    partial = np.zeros((len(ranges), lag_max + 1))

    def work(item):
        ci, (first, count) = item
        batch = sample_batch(sys, stream.child("points"), first, count)
        window = np.empty((count, lag_max + 1))
        for k in range(lag_max + 1):
            window[:, k] = f.evaluate_batch(batch) - mean
            if k < lag_max:
                step_batch(batch, 1)
        g0 = window[:, 0]
        for lag in range(lag_max + 1):
            partial[ci, lag] = np.sum(g0 * window[:, lag])

    items = list(enumerate(ranges))
    if workers <= 1:
        for item in items:
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, items))
    covs = partial.sum(axis=0) / n_samples
    raw = float(covs[0] + 2.0 * np.sum(covs[1:]))
    clamped = raw < 0.0
    value = max(raw, 0.0)
    tail_lo = int(math.floor(0.9 * lag_max)) + 1
    tail = float(np.sum(np.abs(2.0 * covs[tail_lo:])))
    denom = value if value > 0.0 else 1.0
    tail_fraction = tail / denom
    return GreenKuboResult(
        variance=value,
        variance_raw=raw,
        lag_covariances=tuple(float(c) for c in covs),
        tail_fraction=tail_fraction,
        tail_ok=bool(tail_fraction < 0.01),
        clamped=clamped,
        lag_max=lag_max,
        n_samples=n_samples,
    )
