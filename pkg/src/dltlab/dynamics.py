"""Concrete measure-preserving systems, companion maps, and sampling.

Three system kinds share one interface:

``torus_automorphism``
    x -> M x mod 1 on the d-torus, M an integer matrix with |det M| = 1.
    Invertible (the inverse matrix is again integral), preserves Lebesgue.
``two_sided_shift``
    The left shift on a bi-infinite i.i.d. symbol sequence.  Points are
    *symbolic*: a 64-bit seed plus an integer window offset, with the
    coordinate at index k a pure counter-based function of (seed, offset+k).
    Applying the map is O(1) (offset arithmetic), and the inverse is exact.
``torus_translation``
    x -> x + v mod 1, an isometry of the d-torus.

Companion maps pair a second map U with the base map T so that hypothesis
diagnostics can measure d(T^n U x, T^n x).  The interesting companion is
``stable_translation``: translation along the contracting eigendirection of
a hyperbolic toral automorphism, which makes (T, U) an exponentially
contracting pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, UnsupportedSystemError
from .streams import Stream

__all__ = [
    "TorusPoint",
    "SymbolicPoint",
    "PhaseSpaceSystem",
    "CompanionMap",
    "torus_automorphism",
    "two_sided_shift",
    "torus_translation",
    "stable_translation",
    "identity_companion",
    "translation_companion",
    "stable_direction",
    "apply_map",
    "apply_companion",
    "distance",
    "sample_measure",
    "sample_batch",
    "step_batch",
    "companion_batch",
    "TorusBatch",
    "ShiftBatch",
]

# Symbol coordinates live at counter position (offset + k) + _INDEX_CENTER so
# that two-sided indices stay unsigned.
_INDEX_CENTER = 1 << 62
_OFFSET_LIMIT = 1 << 40
_METRIC_HORIZON = 64  # cylinder metric compares indices |k| <= 64

# SplitMix64: state(seed, pos) = seed + pos * _GAMMA, output = mix13(state).
# A published, battery-tested counter generator; chosen here because symbol
# draws must be a pure function of (point seed, coordinate index) *and*
# vectorize over points with distinct seeds, which block generators cannot.
# Point seeds are 64-bit words drawn from the splittable Philox streams, so
# two points' coordinate windows overlap in state space with probability
# ~ n^2 * window / 2^64 (~1e-7 for 1e6 points and 1e6-step orbits).
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix13(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _symbol_uniforms(seeds, positions) -> np.ndarray:
    """Uniform [0,1) words at (seed, position), broadcasting both arguments."""
    state = np.uint64(seeds) + np.uint64(positions) * _GAMMA
    return (_mix13(state) >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def _mod1(a: np.ndarray) -> np.ndarray:
    # x % 1.0 rounds to exactly 1.0 for tiny negative x; fold that back to 0.
    r = np.mod(a, 1.0)
    return np.where(r >= 1.0, 0.0, r)


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class TorusPoint:
    """A point on the d-torus; coordinates are floats in [0, 1)."""

    coords: tuple[float, ...]

    def __post_init__(self):
        for c in self.coords:
            if not (0.0 <= c < 1.0):
                raise DomainError(f"torus coordinate {c} outside [0, 1)")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)


@dataclass(frozen=True)
class SymbolicPoint:
    """A bi-infinite symbol sequence, stored as (seed, window offset).

    coordinate(k) depends only on (seed, offset + k): shifting the point is
    pure offset arithmetic, and equality of (seed, offset) implies equality
    of every coordinate.
    """

    seed: int
    offset: int
    alphabet_size: int
    cumweights: tuple[float, ...]

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise DomainError("symbolic seed must fit in 64 bits")
        if abs(self.offset) > _OFFSET_LIMIT:
            raise DomainError("symbolic offset outside the supported range")
        if self.alphabet_size < 2:
            raise DomainError("alphabet needs at least two symbols")

    def coordinate(self, k: int) -> int:
        return int(self.coordinates(k, k + 1)[0])

    def coordinates(self, k_from: int, k_to: int) -> np.ndarray:
        """Symbols at indices [k_from, k_to), vectorized."""
        if k_to < k_from:
            raise DomainError("empty or reversed coordinate range")
        positions = np.arange(
            self.offset + k_from + _INDEX_CENTER,
            self.offset + k_to + _INDEX_CENTER,
            dtype=np.uint64,
        )
        u = _symbol_uniforms(np.uint64(self.seed), positions)
        cum = np.asarray(self.cumweights)[:-1]
        return np.searchsorted(cum, u, side="right").astype(np.int64)


Point = TorusPoint | SymbolicPoint


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class PhaseSpaceSystem:
    """A measure-preserving system of one of the three supported kinds."""

    kind: str
    dim: int
    matrix: tuple[tuple[int, ...], ...] | None = None
    translation: tuple[float, ...] | None = None
    weights: tuple[float, ...] | None = None
    _inverse: tuple[tuple[int, ...], ...] | None = field(default=None, repr=False)

    @property
    def alphabet_size(self) -> int:
        if self.kind != "two_sided_shift":
            raise UnsupportedSystemError("alphabet_size is a shift notion")
        return len(self.weights)

    def cumweights(self) -> tuple[float, ...]:
        return tuple(float(c) for c in np.cumsum(np.asarray(self.weights, dtype=np.float64)))


def torus_automorphism(matrix) -> PhaseSpaceSystem:
    """Toral automorphism from an integer matrix with |det| = 1."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigurationError("matrix must be square")
    if not np.array_equal(m, np.round(m)):
        raise ConfigurationError("matrix entries must be integers")
    m = m.astype(np.int64)
    det = int(round(np.linalg.det(m.astype(np.float64))))
    if det not in (1, -1):
        raise ConfigurationError(f"matrix determinant is {det}, need +-1")
    # adjugate / det is the exact integer inverse when det = +-1
    inv = np.round(np.linalg.inv(m.astype(np.float64)) * det).astype(np.int64) * det
    if not np.array_equal(m @ inv, np.eye(m.shape[0], dtype=np.int64)):
        raise ConfigurationError("failed to build an exact integer inverse")
    return PhaseSpaceSystem(
        kind="torus_automorphism",
        dim=m.shape[0],
        matrix=tuple(tuple(int(v) for v in row) for row in m),
        _inverse=tuple(tuple(int(v) for v in row) for row in inv),
    )


def two_sided_shift(weights) -> PhaseSpaceSystem:
    """Two-sided Bernoulli shift with the given symbol weights."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or len(w) < 2:
        raise ConfigurationError("need at least two symbol weights")
    if np.any(w <= 0):
        raise ConfigurationError("symbol weights must be positive")
    if abs(float(w.sum()) - 1.0) > 1e-12:
        raise ConfigurationError("symbol weights must sum to 1")
    return PhaseSpaceSystem(kind="two_sided_shift", dim=1, weights=tuple(float(x) for x in w))


def torus_translation(vector) -> PhaseSpaceSystem:
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or len(v) == 0:
        raise ConfigurationError("translation vector must be a nonempty 1-d array")
    return PhaseSpaceSystem(
        kind="torus_translation", dim=len(v), translation=tuple(float(x) % 1.0 for x in v)
    )


# ---------------------------------------------------------------------------
# companions


@dataclass(frozen=True)
class CompanionMap:
    """A second map U on the same phase space, used by pair diagnostics."""

    kind: str  # stable_translation | identity | torus_translation
    vector: tuple[float, ...] | None = None
    amplitude: float | None = None


def stable_direction(sys: PhaseSpaceSystem) -> np.ndarray:
    """Unit eigenvector of the contracting eigenvalue of a hyperbolic matrix.

    Sign convention: first nonzero component positive, so the direction is
    deterministic across linear algebra backends.
    """
    if sys.kind != "torus_automorphism":
        raise UnsupportedSystemError("stable direction needs a toral automorphism")
    m = np.asarray(sys.matrix, dtype=np.float64)
    vals, vecs = np.linalg.eig(m)
    stable = [
        i
        for i in range(len(vals))
        if abs(vals[i].imag) < 1e-12 and abs(vals[i].real) < 1.0 - 1e-9
    ]
    if not stable:
        raise UnsupportedSystemError("matrix has no real contracting eigenvalue")
    i = min(stable, key=lambda j: abs(vals[j].real))
    v = vecs[:, i].real
    v = v / np.linalg.norm(v)
    for c in v:
        if abs(c) > 1e-12:
            if c < 0:
                v = -v
            break
    return v


def stable_translation(sys: PhaseSpaceSystem, amplitude: float) -> CompanionMap:
    """U x = x + amplitude * (unit stable eigenvector), mod 1."""
    v = stable_direction(sys)  # raises on non-hyperbolic input
    return CompanionMap(
        kind="stable_translation",
        vector=tuple(float(c) for c in v),
        amplitude=float(amplitude),
    )


def identity_companion() -> CompanionMap:
    return CompanionMap(kind="identity")


def translation_companion(vector) -> CompanionMap:
    v = np.asarray(vector, dtype=np.float64)
    return CompanionMap(kind="torus_translation", vector=tuple(float(x) % 1.0 for x in v))


def companion_displacement(comp: CompanionMap) -> np.ndarray | None:
    """The constant displacement U x - x, or None for the identity."""
    if comp.kind == "identity":
        return None
    if comp.kind == "torus_translation":
        return np.asarray(comp.vector, dtype=np.float64)
    if comp.kind == "stable_translation":
        return comp.amplitude * np.asarray(comp.vector, dtype=np.float64)
    raise ConfigurationError(f"unknown companion kind {comp.kind!r}")


# ---------------------------------------------------------------------------
# scalar operations


def _check_point(sys: PhaseSpaceSystem, x: Point) -> None:
    if sys.kind == "two_sided_shift":
        if not isinstance(x, SymbolicPoint):
            raise DomainError("shift systems act on symbolic points")
    else:
        if not isinstance(x, TorusPoint) or x.dim != sys.dim:
            raise DomainError("point dimension does not match the system")


def apply_map(sys: PhaseSpaceSystem, x: Point, n: int = 1) -> Point:
    """n-th iterate of the map; n may be negative (all kinds are invertible)."""
    _check_point(sys, x)
    if abs(n) > 2**40:
        raise DomainError("|n| above the supported iterate range")
    if sys.kind == "two_sided_shift":
        return SymbolicPoint(
            seed=x.seed,
            offset=x.offset + n,
            alphabet_size=x.alphabet_size,
            cumweights=x.cumweights,
        )
    if sys.kind == "torus_translation":
        v = np.asarray(sys.translation)
        return TorusPoint(tuple(float(c) for c in _mod1(x.as_array() + n * v)))
    m = np.asarray(sys.matrix if n >= 0 else sys._inverse, dtype=np.float64)
    c = x.as_array()
    for _ in range(abs(n)):
        c = _mod1(m @ c)
    return TorusPoint(tuple(float(v) for v in c))


def apply_companion(sys: PhaseSpaceSystem, comp: CompanionMap, x: Point) -> Point:
    _check_point(sys, x)
    if comp.kind == "identity":
        return x
    if sys.kind == "two_sided_shift":
        raise UnsupportedSystemError("translation companions need a torus system")
    disp = companion_displacement(comp)
    if len(disp) != sys.dim:
        raise ConfigurationError("companion dimension does not match the system")
    return TorusPoint(tuple(float(c) for c in _mod1(x.as_array() + disp)))


def distance(sys: PhaseSpaceSystem, x: Point, y: Point) -> float:
    """Invariant metric: wraparound Euclidean on tori, 2^(-closest
    disagreement index) on shifts (indices compared out to |k| <= 64)."""
    _check_point(sys, x)
    _check_point(sys, y)
    if sys.kind == "two_sided_shift":
        if x.alphabet_size != y.alphabet_size:
            raise DomainError("points from different alphabets")
        if x.seed == y.seed and x.offset == y.offset:
            return 0.0
        k = _METRIC_HORIZON
        sx = x.coordinates(-k, k + 1)
        sy = y.coordinates(-k, k + 1)
        diff = np.nonzero(sx != sy)[0]
        if len(diff) == 0:
            return 0.0
        closest = int(np.min(np.abs(diff - k)))
        return float(2.0 ** (-closest))
    dx = np.abs(x.as_array() - y.as_array())
    dx = np.minimum(dx, 1.0 - dx)
    return float(np.sqrt(np.sum(dx * dx)))


def sample_measure(sys: PhaseSpaceSystem, stream: Stream, index: int) -> Point:
    """The index-th invariant-measure sample of the stream (pure in index)."""
    batch = sample_batch(sys, stream, index, 1)
    return batch.point(0)


# ---------------------------------------------------------------------------
# batch engine (data-parallel over sample indices)
#
# A batch holds the current state of many orbits at once.  Stepping is
# vectorized; the per-element arithmetic is fixed-order (no BLAS reductions),
# so results are bitwise independent of how samples are chunked.


@dataclass
class TorusBatch:
    sys: PhaseSpaceSystem
    coords: np.ndarray  # (n, d) float64 in [0, 1)

    def __len__(self):
        return self.coords.shape[0]

    def point(self, i: int) -> TorusPoint:
        return TorusPoint(tuple(float(c) for c in self.coords[i]))

    def copy(self) -> "TorusBatch":
        return TorusBatch(self.sys, self.coords.copy())


@dataclass
class ShiftBatch:
    sys: PhaseSpaceSystem
    seeds: np.ndarray  # (n,) uint64
    offsets: np.ndarray  # (n,) int64

    def __len__(self):
        return self.seeds.shape[0]

    def point(self, i: int) -> SymbolicPoint:
        return SymbolicPoint(
            seed=int(self.seeds[i]),
            offset=int(self.offsets[i]),
            alphabet_size=self.sys.alphabet_size,
            cumweights=self.sys.cumweights(),
        )

    def copy(self) -> "ShiftBatch":
        return ShiftBatch(self.sys, self.seeds.copy(), self.offsets.copy())

    def symbol_block(self, k_from: int, k_to: int) -> np.ndarray:
        """(n, k_to-k_from) symbols at window indices [k_from, k_to)."""
        base = self.offsets.astype(np.uint64) + np.uint64(k_from + _INDEX_CENTER)
        positions = base[:, None] + np.arange(k_to - k_from, dtype=np.uint64)[None, :]
        u = _symbol_uniforms(self.seeds[:, None], positions)
        cum = np.asarray(self.sys.cumweights())[:-1]
        return np.searchsorted(cum, u, side="right").astype(np.int64)


Batch = TorusBatch | ShiftBatch


def sample_batch(sys: PhaseSpaceSystem, stream: Stream, first_index: int, count: int) -> Batch:
    """Invariant-measure samples for indices [first_index, first_index+count).

    Word ledger: torus points use 4*ceil(d/4) words per index, shift points
    use 4 words per index (one 64-bit point seed, padded).
    """
    if sys.kind == "two_sided_shift":
        words = stream.raw_items(first_index, count, 1, stride=4)
        return ShiftBatch(sys, words[:, 0].copy(), np.zeros(count, dtype=np.int64))
    d = sys.dim
    stride = 4 * (-(-d // 4))
    u = stream.uniform_items(first_index, count, d, stride=stride)
    return TorusBatch(sys, u)


def step_batch(batch: Batch, n: int = 1) -> None:
    """Advance every orbit in the batch by n steps, in place."""
    sys = batch.sys
    if sys.kind == "two_sided_shift":
        batch.offsets += n
        return
    if sys.kind == "torus_translation":
        v = np.asarray(sys.translation)
        batch.coords[...] = _mod1(batch.coords + n * v)
        return
    m = np.asarray(sys.matrix if n >= 0 else sys._inverse, dtype=np.float64)
    c = batch.coords
    new = np.empty_like(c)
    for _ in range(abs(n)):
        # fixed-order linear combination per output coordinate; no BLAS
        for j in range(sys.dim):
            acc = m[j, 0] * c[:, 0]
            for i in range(1, sys.dim):
                acc = acc + m[j, i] * c[:, i]
            new[:, j] = acc
        c[...] = _mod1(new)


def companion_batch(batch: Batch, comp: CompanionMap) -> Batch:
    """A new batch with U applied to every point."""
    if comp.kind == "identity":
        return batch.copy()
    if isinstance(batch, ShiftBatch):
        raise UnsupportedSystemError("translation companions need a torus system")
    disp = companion_displacement(comp)
    return TorusBatch(batch.sys, _mod1(batch.coords + disp))


# ---------------------------------------------------------------------------
# pair diagnostics


@dataclass(frozen=True)
class ContractionProfile:
    """d(T^n U x, T^n x) for n = 0..n_max, with a fitted decay rate.

    ``slope`` is the least-squares slope of log-distance against n over the
    indices where the distance exceeds 1e-12; None when fewer than two
    indices qualify (e.g. the identity companion, where every distance is
    exactly zero).
    """

    distances: tuple[float, ...]
    slope: float | None
    window_size: int
    final_distance: float
    contracting: bool


def contraction_profile(
    sys: PhaseSpaceSystem, comp: CompanionMap, x: Point, n_max: int
) -> ContractionProfile:
    """Distance profile of the companion pair along the orbit of x.

    Computed with the extended-precision pair engine: in float64 the
    unstable-direction rounding noise overtakes a contracting signal near
    n = 19, which would hide exactly the window the slope fit needs.
    """
    if n_max < 1 or n_max > 10**4:
        raise DomainError("n_max must be in [1, 1e4]")
    from . import orbitpair  # local import; orbitpair depends on this module

    pair = orbitpair.paired_orbit(sys, comp, x, n_max)
    d = pair.distances
    window = np.nonzero(d > 1e-12)[0]
    slope = None
    if len(window) >= 2:
        slope = float(np.polyfit(window.astype(np.float64), np.log(d[window]), 1)[0])
    tail = d[int(0.9 * len(d)) :]
    contracting = bool(np.max(tail) <= max(1e-9, 1e-6 * float(np.max(d))))
    return ContractionProfile(
        distances=tuple(float(v) for v in d),
        slope=slope,
        window_size=int(len(window)),
        final_distance=float(d[-1]),
        contracting=contracting,
    )
