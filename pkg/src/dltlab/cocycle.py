"""Matrix cocycles over a base system: products, growth, spectra, diagnostics.

A cocycle is generated by an invertible-matrix-valued function A on the
phase space; over the orbit of x it composes as

    C(x, N) = A(T^{N-1} x) ... A(T x) A(x),     C(x, 0) = I,
    C(x, -N) = C(T^{-N} x, N)^{-1}.

Raw products overflow quickly (entries grow like e^{lambda N}), so growth
is measured through renormalized accumulators:

    sigma(x, v, N) = log(|C(x, N) v| / |v|)   (vector growth)
    sigma(x, N)    = log |C(x, N)|_op          (top singular growth)

with the running vector (or matrix) rescaled every ``renorm_period`` steps
and the scale logged.  The result is independent of the renormalization
period up to roundoff, which the acceptance tests pin down.

Batch routines are data-parallel over sample indices with fixed-order
per-element arithmetic, so chunking never changes results bitwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

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
    sample_batch,
    step_batch,
)
from .errors import (
    ConfigurationError,
    DomainError,
    OverflowGuardError,
    UnsupportedSystemError,
)
from .streams import Stream

__all__ = [
    "CocycleGenerator",
    "constant_generator",
    "symbol_table_generator",
    "smooth_torus_generator",
    "MatrixCocycle",
    "matrix_cocycle",
    "CompanionTransport",
    "identity_transport",
    "symbol_table_transport",
    "Section",
    "constant_section",
    "trig_section",
    "evaluate",
    "sigma_vec",
    "sigma_norm",
    "sigma_vec_batch",
    "sigma_norm_batch",
    "exterior_power",
    "lyapunov_spectrum",
    "LyapunovEstimate",
    "boundedness_check",
    "BoundednessReport",
    "sample_directions",
    "dominated_splitting_profile",
    "strong_splitting_profile",
    "section_genericity_profile",
    "cocycle_adaptedness_profile",
    "SplittingProfile",
]

_COND_CAP = 1e12
_ENTRY_CAP = 1e300
_MAX_PRODUCT = 10**6
_RENORM_BUDGET = 300.0 * math.log(2.0)
_SMOOTH_GRID = 2048  # phase grid for validating smooth families


def _opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class CocycleGenerator:
    """Matrix-valued generator A(x); kinds: constant, symbol_table,
    smooth_torus (B + C cos(2 pi k.x) + S sin(2 pi k.x)), wedge."""

    kind: str
    dim: int
    log_norm_bound: float
    matrix: tuple | None = None
    tables: tuple | None = None  # per-symbol matrices
    base: tuple | None = None
    cos_coeff: tuple | None = None
    sin_coeff: tuple | None = None
    frequency: tuple[int, ...] | None = None
    inner: "CocycleGenerator | None" = None
    wedge_k: int = 0
    _inverse: tuple | None = field(default=None, repr=False)
    _inverse_tables: tuple | None = field(default=None, repr=False)

    # -- scalar evaluation ---------------------------------------------------

    def matrix_at(self, x: Point) -> np.ndarray:
        if self.kind == "constant":
            return np.asarray(self.matrix, dtype=np.float64)
        if self.kind == "symbol_table":
            if not isinstance(x, SymbolicPoint):
                raise DomainError("symbol_table generators act on symbolic points")
            return np.asarray(self.tables[x.coordinate(0)], dtype=np.float64)
        if self.kind == "smooth_torus":
            if not isinstance(x, TorusPoint):
                raise DomainError("smooth_torus generators act on torus points")
            k = np.asarray(self.frequency, dtype=np.float64)
            phase = 2.0 * np.pi * float(k @ x.as_array())
            return (
                np.asarray(self.base)
                + np.asarray(self.cos_coeff) * np.cos(phase)
                + np.asarray(self.sin_coeff) * np.sin(phase)
            )
        if self.kind == "wedge":
            return _wedge_matrix(self.inner.matrix_at(x), self.wedge_k)
        raise ConfigurationError(f"unknown generator kind {self.kind!r}")

    def inverse_at(self, x: Point) -> np.ndarray:
        if self.kind == "constant":
            return np.asarray(self._inverse, dtype=np.float64)
        if self.kind == "symbol_table":
            if not isinstance(x, SymbolicPoint):
                raise DomainError("symbol_table generators act on symbolic points")
            return np.asarray(self._inverse_tables[x.coordinate(0)], dtype=np.float64)
        return np.linalg.inv(self.matrix_at(x))

    # -- batch evaluation ------------------------------------------------------

    def matrices_batch(self, batch: Batch) -> np.ndarray:
        """(n, m, m) generator matrices at the batch's current points."""
        n = len(batch)
        if self.kind == "constant":
            return np.broadcast_to(np.asarray(self.matrix), (n, self.dim, self.dim))
        if self.kind == "symbol_table":
            syms = batch.symbol_block(0, 1)[:, 0]
            return np.asarray(self.tables, dtype=np.float64)[syms]
        if self.kind == "smooth_torus":
            k = np.asarray(self.frequency, dtype=np.float64)
            c = batch.coords
            phase = k[0] * c[:, 0]
            for i in range(1, len(k)):
                phase = phase + k[i] * c[:, i]
            phase = 2.0 * np.pi * phase
            return (
                np.asarray(self.base)[None, :, :]
                + np.asarray(self.cos_coeff)[None, :, :] * np.cos(phase)[:, None, None]
                + np.asarray(self.sin_coeff)[None, :, :] * np.sin(phase)[:, None, None]
            )
        if self.kind == "wedge":
            return _wedge_matrices(self.inner.matrices_batch(batch), self.wedge_k)
        raise ConfigurationError(f"unknown generator kind {self.kind!r}")

    def apply_batch(self, batch: Batch, vectors: np.ndarray) -> np.ndarray:
        """A(x_i) v_i with fixed-order per-element arithmetic."""
        if self.kind == "constant":
            return _matvec_rows(np.asarray(self.matrix, dtype=np.float64), vectors)
        if self.kind == "symbol_table":
            syms = batch.symbol_block(0, 1)[:, 0]
            out = np.empty_like(vectors)
            for s in range(len(self.tables)):
                mask = syms == s
                if np.any(mask):
                    out[mask] = _matvec_rows(
                        np.asarray(self.tables[s], dtype=np.float64), vectors[mask]
                    )
            return out
        mats = self.matrices_batch(batch)
        return _matvec_varying(mats, vectors)


def _matvec_rows(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(m, m) times each row of (n, m), explicit fixed-order sums."""
    d = m.shape[0]
    out = np.empty_like(v)
    for j in range(d):
        acc = m[j, 0] * v[:, 0]
        for i in range(1, d):
            acc = acc + m[j, i] * v[:, i]
        out[:, j] = acc
    return out


def _matvec_varying(mats: np.ndarray, v: np.ndarray) -> np.ndarray:
    """A_i v_i for (n, m, m) and (n, m), explicit fixed-order sums."""
    d = v.shape[1]
    out = np.empty_like(v)
    for j in range(d):
        acc = mats[:, j, 0] * v[:, 0]
        for i in range(1, d):
            acc = acc + mats[:, j, i] * v[:, i]
        out[:, j] = acc
    return out


def _row_norms(v: np.ndarray) -> np.ndarray:
    acc = v[:, 0] * v[:, 0]
    for i in range(1, v.shape[1]):
        acc = acc + v[:, i] * v[:, i]
    return np.sqrt(acc)


def _validate_matrix(m: np.ndarray, what: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigurationError(f"{what} must be square")
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] > _COND_CAP:
        raise ConfigurationError(
            f"{what} is singular or has condition number above {_COND_CAP:.0e}"
        )


def constant_generator(matrix, log_norm_bound: float | None = None) -> CocycleGenerator:
    m = np.asarray(matrix, dtype=np.float64)
    _validate_matrix(m, "generator matrix")
    inv = np.linalg.inv(m)
    exact = max(math.log(_opnorm(m)), math.log(_opnorm(inv)))
    bound = exact if log_norm_bound is None else float(log_norm_bound)
    if bound < exact - 1e-12:
        raise ConfigurationError("declared log-norm bound is below the exact value")
    return CocycleGenerator(
        kind="constant",
        dim=m.shape[0],
        log_norm_bound=bound,
        matrix=tuple(tuple(float(v) for v in row) for row in m),
        _inverse=tuple(tuple(float(v) for v in row) for row in inv),
    )


def symbol_table_generator(tables, log_norm_bound: float | None = None) -> CocycleGenerator:
    mats = [np.asarray(t, dtype=np.float64) for t in tables]
    if len(mats) < 2:
        raise ConfigurationError("symbol table needs one matrix per symbol (>= 2)")
    d = mats[0].shape[0]
    exact = 0.0
    invs = []
    for i, m in enumerate(mats):
        _validate_matrix(m, f"table matrix {i}")
        if m.shape[0] != d:
            raise ConfigurationError("table matrices must share a dimension")
        inv = np.linalg.inv(m)
        invs.append(inv)
        exact = max(exact, math.log(_opnorm(m)), math.log(_opnorm(inv)))
    bound = exact if log_norm_bound is None else float(log_norm_bound)
    if bound < exact - 1e-12:
        raise ConfigurationError("declared log-norm bound is below the exact value")
    freeze = lambda m: tuple(tuple(float(v) for v in row) for row in m)  # noqa: E731
    return CocycleGenerator(
        kind="symbol_table",
        dim=d,
        log_norm_bound=bound,
        tables=tuple(freeze(m) for m in mats),
        _inverse_tables=tuple(freeze(m) for m in invs),
    )


def smooth_torus_generator(
    base, cos_coeff=None, sin_coeff=None, frequency=(1, 0), log_norm_bound: float | None = None
) -> CocycleGenerator:
    """A(x) = base + cos_coeff * cos(2 pi k.x) + sin_coeff * sin(2 pi k.x).

    Invertibility and the log-norm bound are validated on a dense phase
    grid; a single frequency term means the phase grid covers the whole
    family, so the grid check is exhaustive up to grid resolution.
    """
    b = np.asarray(base, dtype=np.float64)
    d = b.shape[0]
    c = np.zeros((d, d)) if cos_coeff is None else np.asarray(cos_coeff, dtype=np.float64)
    s = np.zeros((d, d)) if sin_coeff is None else np.asarray(sin_coeff, dtype=np.float64)
    if b.shape != (d, d) or c.shape != (d, d) or s.shape != (d, d):
        raise ConfigurationError("coefficient matrices must be square and same shape")
    worst = 0.0
    for phase in np.linspace(0.0, 2.0 * np.pi, _SMOOTH_GRID, endpoint=False):
        m = b + c * np.cos(phase) + s * np.sin(phase)
        _validate_matrix(m, "smooth family member")
        worst = max(worst, math.log(_opnorm(m)), math.log(_opnorm(np.linalg.inv(m))))
    bound = worst * 1.02 + 1e-9 if log_norm_bound is None else float(log_norm_bound)
    if bound < worst - 1e-9:
        raise ConfigurationError("declared log-norm bound is below the sampled value")
    freeze = lambda m: tuple(tuple(float(v) for v in row) for row in m)  # noqa: E731
    return CocycleGenerator(
        kind="smooth_torus",
        dim=d,
        log_norm_bound=bound,
        base=freeze(b),
        cos_coeff=freeze(c),
        sin_coeff=freeze(s),
        frequency=tuple(int(v) for v in frequency),
    )


# ---------------------------------------------------------------------------
# exterior powers


def _wedge_basis(m: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(m), k))


def _wedge_matrix(a: np.ndarray, k: int) -> np.ndarray:
    """Matrix of the k-th exterior power on the lexicographic wedge basis.

    Entry (I, J) is the k x k minor det(a[I, J]).
    """
    basis = _wedge_basis(a.shape[0], k)
    out = np.empty((len(basis), len(basis)))
    for bi, rows in enumerate(basis):
        sub = a[np.ix_(rows, range(a.shape[0]))]
        for bj, cols in enumerate(basis):
            out[bi, bj] = np.linalg.det(sub[:, cols])
    return out


def _wedge_matrices(mats: np.ndarray, k: int) -> np.ndarray:
    basis = _wedge_basis(mats.shape[1], k)
    n = mats.shape[0]
    out = np.empty((n, len(basis), len(basis)))
    for bi, rows in enumerate(basis):
        for bj, cols in enumerate(basis):
            out[:, bi, bj] = np.linalg.det(mats[:, rows, :][:, :, cols])
    return out


# ---------------------------------------------------------------------------
# cocycles


@dataclass(frozen=True)
class MatrixCocycle:
    sys: PhaseSpaceSystem
    generator: CocycleGenerator
    renorm_period: int = 32

    def __post_init__(self):
        if self.renorm_period < 1:
            raise ConfigurationError("renorm_period must be >= 1")
        if self.renorm_period * self.generator.log_norm_bound > _RENORM_BUDGET:
            raise ConfigurationError(
                "renorm_period times the log-norm bound exceeds the overflow "
                f"budget ({_RENORM_BUDGET:.1f}); lower the period"
            )
        if self.generator.kind == "symbol_table" and self.sys.kind != "two_sided_shift":
            raise ConfigurationError("symbol_table generators need a shift base")
        if self.generator.kind == "smooth_torus" and self.sys.kind == "two_sided_shift":
            raise ConfigurationError("smooth_torus generators need a torus base")

    @property
    def dim(self) -> int:
        return self.generator.dim


def matrix_cocycle(
    sys: PhaseSpaceSystem, generator: CocycleGenerator, renorm_period: int = 32
) -> MatrixCocycle:
    return MatrixCocycle(sys=sys, generator=generator, renorm_period=renorm_period)


def exterior_power(coc: MatrixCocycle, k: int) -> MatrixCocycle:
    m = coc.generator.dim
    if k < 1 or k > m:
        raise DomainError("exterior power order must be in [1, dim]")
    if coc.generator.kind == "constant":
        inner = np.asarray(coc.generator.matrix)
        gen = constant_generator(_wedge_matrix(inner, k))
    else:
        # |wedge^k A| <= |A|^k, same for the inverse
        gen = CocycleGenerator(
            kind="wedge",
            dim=math.comb(m, k),
            log_norm_bound=k * coc.generator.log_norm_bound,
            inner=coc.generator,
            wedge_k=k,
        )
    period = max(1, min(coc.renorm_period, int(_RENORM_BUDGET / max(gen.log_norm_bound, 1e-9))))
    return MatrixCocycle(sys=coc.sys, generator=gen, renorm_period=period)


# ---------------------------------------------------------------------------
# exact products and growth accumulators


def _point_batch(coc: MatrixCocycle, x: Point) -> Batch:
    if coc.sys.kind == "two_sided_shift":
        return ShiftBatch(
            coc.sys,
            np.array([x.seed], dtype=np.uint64),
            np.array([x.offset], dtype=np.int64),
        )
    return TorusBatch(coc.sys, np.asarray([x.coords], dtype=np.float64))


def evaluate(coc: MatrixCocycle, x: Point, n_steps: int) -> np.ndarray:
    """The raw matrix product C(x, N); N may be negative.

    Guarded against overflow: entries beyond 1e300 abort with advice to use
    the renormalized growth routines instead.
    """
    if abs(n_steps) > _MAX_PRODUCT:
        raise DomainError(f"|N| must be at most {_MAX_PRODUCT}")
    gen = coc.generator
    prod = np.eye(gen.dim)
    y = x
    from .dynamics import apply_map  # local to avoid cycles at import time

    for k in range(abs(n_steps)):
        if n_steps >= 0:
            step = gen.matrix_at(y)
            y = apply_map(coc.sys, y, 1)
        else:
            y = apply_map(coc.sys, y, -1)
            step = gen.inverse_at(y)
        prod = step @ prod
        if np.max(np.abs(prod)) > _ENTRY_CAP:
            raise OverflowGuardError(
                f"product entries exceeded {_ENTRY_CAP:.0e} at step {k + 1}; "
                "use the renormalized sigma routines for long products"
            )
    return prod


def sigma_vec_batch(
    coc: MatrixCocycle, batch: Batch, vectors: np.ndarray, n_steps: int
) -> tuple[np.ndarray, Batch, np.ndarray]:
    """sigma(x_i, v_i, N) for every row; steps the batch to time N in place.

    Returns (values, terminal batch, terminal unit directions); the latter
    are C(x, N) v / |C(x, N) v|, the image directions on projective space.
    """
    if n_steps < 0 or n_steps > _MAX_PRODUCT:
        raise DomainError(f"N must be in [0, {_MAX_PRODUCT}] for batch growth")
    v = np.array(vectors, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != len(batch) or v.shape[1] != coc.dim:
        raise DomainError("vectors must be (n_samples, dim)")
    norms = _row_norms(v)
    if np.any(norms == 0.0):
        raise DomainError("zero direction vector")
    v /= norms[:, None]
    logacc = np.zeros(len(batch))
    gen = coc.generator
    for n in range(n_steps):
        v = gen.apply_batch(batch, v)
        step_batch(batch, 1)
        if (n + 1) % coc.renorm_period == 0:
            norms = _row_norms(v)
            logacc += np.log(norms)
            v /= norms[:, None]
    norms = _row_norms(v)
    return logacc + np.log(norms), batch, v / norms[:, None]


def sigma_vec(coc: MatrixCocycle, x: Point, v, n_steps: int) -> float:
    """log(|C(x, N) v| / |v|); N may be negative."""
    if abs(n_steps) > _MAX_PRODUCT:
        raise DomainError(f"|N| must be at most {_MAX_PRODUCT}")
    if n_steps >= 0:
        batch = _point_batch(coc, x)
        vals, _, _ = sigma_vec_batch(coc, batch, np.asarray([v], dtype=np.float64), n_steps)
        return float(vals[0])
    # backward product: left-multiply by successive inverse matrices
    from .dynamics import apply_map

    vec = np.array(v, dtype=np.float64)
    norm = float(np.sqrt(np.sum(vec * vec)))
    if norm == 0.0:
        raise DomainError("zero direction vector")
    vec /= norm
    logacc = 0.0
    y = x
    gen = coc.generator
    for k in range(-n_steps):
        y = apply_map(coc.sys, y, -1)
        vec = gen.inverse_at(y) @ vec
        if (k + 1) % coc.renorm_period == 0:
            nn = float(np.linalg.norm(vec))
            logacc += math.log(nn)
            vec /= nn
    return logacc + float(np.log(np.linalg.norm(vec)))


def sigma_norm_batch(
    coc: MatrixCocycle, batch: Batch, n_steps: int
) -> tuple[np.ndarray, Batch]:
    """sigma(x_i, N) = log of the top singular value of C(x_i, N)."""
    if n_steps < 0 or n_steps > _MAX_PRODUCT:
        raise DomainError(f"N must be in [0, {_MAX_PRODUCT}] for batch growth")
    n = len(batch)
    m = coc.dim
    prod = np.broadcast_to(np.eye(m), (n, m, m)).copy()
    logacc = np.zeros(n)
    gen = coc.generator
    for k in range(n_steps):
        mats = gen.matrices_batch(batch)
        prod = np.matmul(mats, prod)
        step_batch(batch, 1)
        if (k + 1) % coc.renorm_period == 0:
            tops = np.linalg.svd(prod, compute_uv=False)[:, 0]
            logacc += np.log(tops)
            prod /= tops[:, None, None]
    tops = np.linalg.svd(prod, compute_uv=False)[:, 0]
    return logacc + np.log(tops), batch


def sigma_norm(coc: MatrixCocycle, x: Point, n_steps: int) -> float:
    if n_steps < 0:
        # sigma(x, -N) through the inverse-product route, renormalized
        if abs(n_steps) > _MAX_PRODUCT:
            raise DomainError(f"|N| must be at most {_MAX_PRODUCT}")
        from .dynamics import apply_map

        prod = np.eye(coc.dim)
        logacc = 0.0
        y = x
        for k in range(-n_steps):
            y = apply_map(coc.sys, y, -1)
            prod = coc.generator.inverse_at(y) @ prod
            if (k + 1) % coc.renorm_period == 0:
                top = _opnorm(prod)
                logacc += math.log(top)
                prod /= top
        return logacc + math.log(_opnorm(prod))
    batch = _point_batch(coc, x)
    vals, _ = sigma_norm_batch(coc, batch, n_steps)
    return float(vals[0])


# ---------------------------------------------------------------------------
# directions


def sample_directions(stream: Stream, first_index: int, count: int, dim: int) -> np.ndarray:
    """Unit directions from the orthogonally invariant measure (normalized
    isotropic gaussians), addressed by sample index."""
    width = 4 * (-(-dim // 4))
    g = stream.gaussian_items(first_index, count, dim, stride=width)
    norms = _row_norms(g)
    # a gaussian vector is never numerically zero in practice; guard anyway
    bad = norms < 1e-12
    if np.any(bad):
        g[bad] = 0.0
        g[bad, 0] = 1.0
        norms = _row_norms(g)
    return g / norms[:, None]


# ---------------------------------------------------------------------------
# Lyapunov spectra


@dataclass(frozen=True)
class LyapunovEstimate:
    """Per-orbit exponents aggregated to mean +- standard error.

    ``converged`` flags, per exponent, that the first and second halves of
    the orbit ensemble agree within 10 combined standard errors; a failure
    marks a trending (non-self-averaging) estimate.
    """

    exponents: tuple[float, ...]
    std_errors: tuple[float, ...]
    per_orbit: np.ndarray  # (n_orbits, k)
    n_orbits: int
    n_steps: int
    converged: tuple[bool, ...]

    @property
    def top(self) -> float:
        return self.exponents[0]


def _aggregate_exponents(per_orbit: np.ndarray, n_steps: int) -> LyapunovEstimate:
    n_orbits, k = per_orbit.shape
    means = per_orbit.mean(axis=0)
    ses = per_orbit.std(axis=0, ddof=1) / math.sqrt(n_orbits) if n_orbits > 1 else np.zeros(k)
    converged = []
    half = n_orbits // 2
    for j in range(k):
        if half < 2:
            converged.append(True)
            continue
        a, b = per_orbit[:half, j], per_orbit[half:, j]
        se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
        converged.append(bool(abs(a.mean() - b.mean()) <= 10.0 * max(se, 1e-300)))
    return LyapunovEstimate(
        exponents=tuple(float(v) for v in means),
        std_errors=tuple(float(v) for v in ses),
        per_orbit=per_orbit,
        n_orbits=n_orbits,
        n_steps=n_steps,
        converged=tuple(converged),
    )


def lyapunov_spectrum(
    coc: MatrixCocycle,
    stream: Stream,
    n_orbits: int,
    n_steps: int,
    n_exponents: int | None = None,
    qr_period: int | None = None,
) -> LyapunovEstimate:
    """Benettin-style spectrum: orthonormal frame, QR renormalization.

    The frame is re-orthonormalized every ``qr_period`` steps; exponents are
    the accumulated log diagonal of R divided by orbit length.  The default
    period caps the inter-pass product at about 4 log-units of one-step
    growth: beyond that the frame's condition number approaches 1/eps and
    the lower diagonal entries of R lose their digits to cancellation.
    """
    m = coc.dim
    k = m if n_exponents is None else n_exponents
    if k < 1 or k > m:
        raise DomainError("n_exponents must be in [1, dim]")
    if n_orbits < 1 or n_steps < 1:
        raise DomainError("need at least one orbit and one step")
    if qr_period is None:
        bound = max(coc.generator.log_norm_bound, 1e-9)
        qr_period = max(1, min(coc.renorm_period, int(4.0 / bound)))
    if qr_period < 1:
        raise DomainError("qr_period must be >= 1")
    batch = sample_batch(coc.sys, stream, 0, n_orbits)
    frames = np.broadcast_to(np.eye(m)[:, :k], (n_orbits, m, k)).copy()
    logdiag = np.zeros((n_orbits, k))
    gen = coc.generator
    span_products: dict[int, np.ndarray] = {}
    done = 0
    while done < n_steps:
        span = min(qr_period, n_steps - done)
        if gen.kind == "constant":
            # base point never enters A(x); fold the whole span into one
            # exact short product (span * bound <= 4 log-units, no overflow)
            if span not in span_products:
                m_one = np.asarray(gen.matrix, dtype=np.float64)
                prod = m_one.copy()
                for _ in range(span - 1):
                    prod = m_one @ prod
                span_products[span] = prod
            frames = np.matmul(span_products[span], frames)
        else:
            for _ in range(span):
                mats = gen.matrices_batch(batch)
                frames = np.matmul(mats, frames)
                step_batch(batch, 1)
        done += span
        q, r = np.linalg.qr(frames)
        diag = np.einsum("nii->ni", r).copy()
        signs = np.where(diag < 0.0, -1.0, 1.0)
        q *= signs[:, None, :]
        diag *= signs
        if np.any(diag <= 0.0):
            raise OverflowGuardError("degenerate frame during QR renormalization")
        logdiag += np.log(diag)
        frames = q
    return _aggregate_exponents(logdiag / n_steps, n_steps)


# ---------------------------------------------------------------------------
# hypothesis diagnostics


@dataclass(frozen=True)
class BoundednessReport:
    """Sampled check that one-step growth respects the declared bound."""

    max_forward: float
    max_backward: float
    mean_positive_part: float
    declared_bound: float
    n_samples: int
    passed: bool


def boundedness_check(coc: MatrixCocycle, stream: Stream, n_samples: int) -> BoundednessReport:
    """Empirical log-integrability: max over samples of log|A|, log|A^-1|."""
    if n_samples < 1:
        raise DomainError("need at least one sample")
    batch = sample_batch(coc.sys, stream, 0, n_samples)
    mats = coc.generator.matrices_batch(batch)
    fwd = np.log(np.linalg.svd(mats, compute_uv=False)[:, 0])
    back = batch.copy()
    step_batch(back, -1)
    mats_b = coc.generator.matrices_batch(back)
    sv = np.linalg.svd(mats_b, compute_uv=False)
    bwd = -np.log(sv[:, -1])  # log |A(T^-1 x)^-1| = -log s_min
    pos = np.maximum(0.0, np.concatenate([fwd, bwd]))
    max_f, max_b = float(np.max(fwd)), float(np.max(bwd))
    bound = coc.generator.log_norm_bound
    return BoundednessReport(
        max_forward=max_f,
        max_backward=max_b,
        mean_positive_part=float(np.mean(pos)),
        declared_bound=bound,
        n_samples=n_samples,
        passed=bool(max(max_f, max_b) <= bound + 1e-9),
    )


@dataclass(frozen=True)
class SplittingProfile:
    """|sigma difference| profile over N = 1..N_max with running maxima.

    ``decade_growth`` is the relative growth of the running maximum across
    the final decade [N_max/10, N_max]; small growth certifies a bounded
    (O(1)) deviation, which is the checkable strengthening of the o(V_N)
    hypotheses.
    """

    deviations: tuple[float, ...]
    running_max: tuple[float, ...]
    decade_growth: float
    bounded: bool

    @classmethod
    def from_deviations(cls, dev: np.ndarray) -> "SplittingProfile":
        run = np.maximum.accumulate(dev)
        cut = max(0, len(dev) // 10 - 1)
        base = max(float(run[cut]), 1e-12)
        growth = (float(run[-1]) - float(run[cut])) / base
        return cls(
            deviations=tuple(float(v) for v in dev),
            running_max=tuple(float(v) for v in run),
            decade_growth=growth,
            bounded=bool(growth < 0.01),
        )


def _sigma_prefix(
    coc: MatrixCocycle, batch: Batch, vectors: np.ndarray, n_max: int
) -> np.ndarray:
    """(n, N_max) prefix growth sigma(x_i, v_i, N) for N = 1..N_max."""
    v = np.array(vectors, dtype=np.float64)
    norms = _row_norms(v)
    if np.any(norms == 0.0):
        raise DomainError("zero direction vector")
    v /= norms[:, None]
    n = v.shape[0]
    out = np.empty((n, n_max))
    logacc = np.zeros(n)
    gen = coc.generator
    for k in range(n_max):
        v = gen.apply_batch(batch, v)
        step_batch(batch, 1)
        norms = _row_norms(v)
        out[:, k] = logacc + np.log(norms)
        if (k + 1) % coc.renorm_period == 0:
            logacc += np.log(norms)
            v /= norms[:, None]
    return out


def _sigma_norm_prefix(coc: MatrixCocycle, batch: Batch, n_max: int) -> np.ndarray:
    """(n, N_max) prefix operator-norm growth sigma(x_i, N)."""
    n = len(batch)
    m = coc.dim
    prod = np.broadcast_to(np.eye(m), (n, m, m)).copy()
    logacc = np.zeros(n)
    out = np.empty((n, n_max))
    gen = coc.generator
    for k in range(n_max):
        mats = gen.matrices_batch(batch)
        prod = np.matmul(mats, prod)
        step_batch(batch, 1)
        tops = np.linalg.svd(prod, compute_uv=False)[:, 0]
        out[:, k] = logacc + np.log(tops)
        if (k + 1) % coc.renorm_period == 0:
            logacc += np.log(tops)
            prod /= tops[:, None, None]
    return out


def dominated_splitting_profile(
    coc: MatrixCocycle, x: Point, v, w, n_max: int
) -> SplittingProfile:
    """|sigma(x, v, N) - sigma(x, w, N)| for N = 1..N_max.

    Under a simple top exponent this deviation is bounded for generic
    direction pairs; the profile's flat running maximum is the certificate.
    """
    if n_max < 1 or n_max > _MAX_PRODUCT:
        raise DomainError(f"N_max must be in [1, {_MAX_PRODUCT}]")
    pair = np.asarray([v, w], dtype=np.float64)
    if coc.sys.kind == "two_sided_shift":
        batch = ShiftBatch(
            coc.sys,
            np.array([x.seed, x.seed], dtype=np.uint64),
            np.array([x.offset, x.offset], dtype=np.int64),
        )
    else:
        batch = TorusBatch(coc.sys, np.asarray([x.coords, x.coords], dtype=np.float64))
    sig = _sigma_prefix(coc, batch, pair, n_max)
    return SplittingProfile.from_deviations(np.abs(sig[0] - sig[1]))


def strong_splitting_profile(coc: MatrixCocycle, x: Point, v, n_max: int) -> SplittingProfile:
    """|sigma(x, v, N) - sigma(x, N)|: vector growth against top singular growth."""
    if n_max < 1 or n_max > _MAX_PRODUCT:
        raise DomainError(f"N_max must be in [1, {_MAX_PRODUCT}]")
    batch = _point_batch(coc, x)
    sig_v = _sigma_prefix(coc, batch.copy(), np.asarray([v], dtype=np.float64), n_max)[0]
    sig_n = _sigma_norm_prefix(coc, batch, n_max)[0]
    return SplittingProfile.from_deviations(np.abs(sig_v - sig_n))


# ---------------------------------------------------------------------------
# sections


@dataclass(frozen=True)
class Section:
    """A direction field over the phase space.

    kinds: ``constant`` (s(x) = u) and ``trig`` (s(x) = u + w cos(2 pi k.x)).
    """

    kind: str
    u: tuple[float, ...]
    w: tuple[float, ...] | None = None
    frequency: tuple[int, ...] | None = None

    def at(self, x: Point) -> np.ndarray:
        if self.kind == "constant":
            return np.asarray(self.u, dtype=np.float64)
        if not isinstance(x, TorusPoint):
            raise DomainError("trig sections need torus points")
        k = np.asarray(self.frequency, dtype=np.float64)
        phase = 2.0 * np.pi * float(k @ x.as_array())
        s = np.asarray(self.u) + np.asarray(self.w) * np.cos(phase)
        if float(np.linalg.norm(s)) < 1e-10:
            raise DomainError("section vanishes at the evaluation point")
        return s

    def at_batch(self, batch: Batch) -> np.ndarray:
        if self.kind == "constant":
            return np.broadcast_to(
                np.asarray(self.u, dtype=np.float64), (len(batch), len(self.u))
            ).copy()
        if not isinstance(batch, TorusBatch):
            raise DomainError("trig sections need torus points")
        k = np.asarray(self.frequency, dtype=np.float64)
        c = batch.coords
        phase = k[0] * c[:, 0]
        for i in range(1, len(k)):
            phase = phase + k[i] * c[:, i]
        s = np.asarray(self.u)[None, :] + np.asarray(self.w)[None, :] * np.cos(
            2.0 * np.pi * phase
        )[:, None]
        if np.any(_row_norms(s) < 1e-10):
            raise DomainError("section vanishes at a sampled point")
        return s


def constant_section(u) -> Section:
    uu = np.asarray(u, dtype=np.float64)
    if float(np.linalg.norm(uu)) < 1e-10:
        raise ConfigurationError("constant section must be nonzero")
    return Section(kind="constant", u=tuple(float(c) for c in uu))


def trig_section(u, w, frequency) -> Section:
    return Section(
        kind="trig",
        u=tuple(float(c) for c in np.asarray(u, dtype=np.float64)),
        w=tuple(float(c) for c in np.asarray(w, dtype=np.float64)),
        frequency=tuple(int(v) for v in frequency),
    )


def section_genericity_profile(
    coc: MatrixCocycle, section: Section, x: Point, n_max: int
) -> SplittingProfile:
    """|sigma(x, s(x), N) - sigma(x, N)|: does the section see the top rate?"""
    return strong_splitting_profile(coc, x, section.at(x), n_max)


# ---------------------------------------------------------------------------
# companion transport and pair adaptedness


@dataclass(frozen=True)
class CompanionTransport:
    """Transport D(x, 1) carrying directions across the companion map."""

    kind: str  # 'identity_transport' | 'symbol_table'
    tables: tuple | None = None

    def at(self, x: Point, dim: int) -> np.ndarray:
        if self.kind == "identity_transport":
            return np.eye(dim)
        if not isinstance(x, SymbolicPoint):
            raise DomainError("symbol_table transport acts on symbolic points")
        return np.asarray(self.tables[x.coordinate(0)], dtype=np.float64)


def identity_transport() -> CompanionTransport:
    return CompanionTransport(kind="identity_transport")


def symbol_table_transport(tables) -> CompanionTransport:
    mats = tuple(
        tuple(tuple(float(v) for v in row) for row in np.asarray(t, dtype=np.float64))
        for t in tables
    )
    return CompanionTransport(kind="symbol_table", tables=mats)


def cocycle_adaptedness_profile(
    coc: MatrixCocycle,
    comp: CompanionMap,
    x: Point,
    v,
    n_max: int,
    transport: CompanionTransport | None = None,
) -> SplittingProfile:
    """|sigma(x, v, N) - sigma(U x, D v, N)| along certified paired orbits.

    The two orbits come from the extended-precision pair engine; once their
    float64 snapshots merge the generator factors agree bitwise and the
    deviation freezes, so the profile is immune to the float64 noise floor.
    """
    if coc.sys.kind == "two_sided_shift":
        raise UnsupportedSystemError("companion diagnostics need a torus base")
    if n_max < 1 or n_max > 10**4:
        raise DomainError("n_max must be in [1, 1e4]")
    from . import orbitpair

    pair = orbitpair.paired_orbit(coc.sys, comp, x, n_max)
    transport = transport or identity_transport()
    d_matrix = transport.at(x, coc.dim)
    v0 = np.asarray(v, dtype=np.float64)
    dv = d_matrix @ v0

    sig_x = _orbit_sigma_prefix(coc, pair.base, v0, n_max)
    sig_ux = _orbit_sigma_prefix(coc, pair.companion, dv, n_max)
    return SplittingProfile.from_deviations(np.abs(sig_x - sig_ux))


def _orbit_sigma_prefix(
    coc: MatrixCocycle, orbit: np.ndarray, v, n_max: int
) -> np.ndarray:
    """Prefix growth along a precomputed torus orbit (rows = points)."""
    vec = np.array(v, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DomainError("zero direction vector")
    vec /= norm
    out = np.empty(n_max)
    logacc = 0.0
    gen = coc.generator
    for k in range(n_max):
        point = TorusPoint(tuple(float(c) for c in orbit[k]))
        vec = gen.matrix_at(point) @ vec
        nn = float(np.linalg.norm(vec))
        out[k] = logacc + math.log(nn)
        if (k + 1) % coc.renorm_period == 0:
            logacc += math.log(nn)
            vec /= nn
    return out
