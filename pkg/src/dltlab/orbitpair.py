"""Extended-precision paired orbits for companion-map diagnostics.

The pair diagnostics measure d(T^n U x, T^n x).  For a hyperbolic torus map
this decays like |lambda_s|^n while double-precision rounding noise in the
unstable direction grows like |lambda_u|^n; the two cross near n = 19, so a
float64 engine cannot see the decay window the diagnostics need.  This
module therefore iterates both orbits in mpmath with working precision

    64 + n_max * log2(spectral radius) + margin

bits, enough for the pair distance to stay accurate over the whole profile.
The contracting direction itself is recomputed at working precision: a
direction rounded to float64 carries a 2^-53 unstable component, which
would (correctly, but uselessly) certify the rounded companion as
non-contracting.

Downstream consumers get float64 snapshots of both orbits.  Once the mp
distance falls below the float64 resolution the snapshots agree to within
one ulp (bitwise equal except where the true pair straddles a rounding
midpoint), so differences evaluated on them sit at the rounding floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .dynamics import CompanionMap, PhaseSpaceSystem, TorusPoint
from .errors import UnsupportedSystemError

__all__ = ["PairedOrbit", "paired_orbit"]


@dataclass
class PairedOrbit:
    """Float64 snapshots of the orbits of x and U x plus certified distances."""

    base: np.ndarray  # (n_max+1, d) orbit of x
    companion: np.ndarray  # (n_max+1, d) orbit of U x
    distances: np.ndarray  # (n_max+1,) torus distance, from the mp engine
    precision_bits: int


def _working_precision(sys: PhaseSpaceSystem, n_max: int) -> int:
    # Rounding noise seeded at 2^-p grows like rho^n while the contracting
    # signal decays like sigma_min^n, so resolving the signal for all
    # n <= n_max needs p > n_max * log2(rho / sigma_min) plus margin.
    if sys.kind == "torus_automorphism":
        mags = np.abs(np.linalg.eigvals(np.asarray(sys.matrix, dtype=np.float64)))
        rho = max(1.0, float(np.max(mags)))
        sigma_min = min(1.0, max(1e-12, float(np.min(mags))))
    else:
        rho, sigma_min = 1.0, 1.0
    return 96 + int(math.ceil(n_max * (math.log2(rho) - math.log2(sigma_min))))


def _mp_stable_direction(sys: PhaseSpaceSystem) -> list:
    """Unit contracting eigenvector at working precision (sign-fixed)."""
    m = mpmath.matrix(sys.matrix)
    d = m.rows
    vals, vecs = mpmath.eig(m)
    best = None
    for i, lam in enumerate(vals):
        if abs(mpmath.im(lam)) > mpmath.mpf(2) ** (-mpmath.mp.prec // 2):
            continue
        lam_re = mpmath.re(lam)
        if abs(lam_re) < 1:
            if best is None or abs(lam_re) < abs(best[0]):
                best = (lam_re, i)
    if best is None:
        raise UnsupportedSystemError("matrix has no real contracting eigenvalue")
    idx = best[1]
    v = [mpmath.re(vecs[j, idx]) for j in range(d)]
    norm = mpmath.sqrt(mpmath.fsum(c * c for c in v))
    v = [c / norm for c in v]
    for c in v:
        if abs(c) > mpmath.mpf(2) ** (-mpmath.mp.prec // 2):
            if c < 0:
                v = [-u for u in v]
            break
    return v


def _mp_displacement(sys: PhaseSpaceSystem, comp: CompanionMap) -> list | None:
    if comp.kind == "identity":
        return None
    if comp.kind == "torus_translation":
        return [mpmath.mpf(c) for c in comp.vector]
    if comp.kind == "stable_translation":
        direction = _mp_stable_direction(sys)
        amp = mpmath.mpf(comp.amplitude)
        return [amp * c for c in direction]
    raise UnsupportedSystemError(f"unknown companion kind {comp.kind!r}")


def _mp_frac(v):
    return v - mpmath.floor(v)


def _mp_step(sys: PhaseSpaceSystem, x: list) -> list:
    if sys.kind == "torus_translation":
        return [_mp_frac(c + mpmath.mpf(t)) for c, t in zip(x, sys.translation)]
    m = sys.matrix
    d = len(x)
    return [_mp_frac(mpmath.fsum(m[j][i] * x[i] for i in range(d))) for j in range(d)]


def _mp_distance(x: list, y: list) -> mpmath.mpf:
    acc = mpmath.mpf(0)
    for a, b in zip(x, y):
        dx = abs(a - b)
        dx = min(dx, 1 - dx)
        acc += dx * dx
    return mpmath.sqrt(acc)


def paired_orbit(
    sys: PhaseSpaceSystem, comp: CompanionMap, x: TorusPoint, n_max: int
) -> PairedOrbit:
    if sys.kind == "two_sided_shift":
        raise UnsupportedSystemError("pair diagnostics need a torus system")
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    d = sys.dim
    prec = _working_precision(sys, n_max)
    base = np.empty((n_max + 1, d), dtype=np.float64)
    other = np.empty((n_max + 1, d), dtype=np.float64)
    dists = np.empty(n_max + 1, dtype=np.float64)
    with mpmath.workprec(prec):
        xs = [mpmath.mpf(c) for c in x.coords]
        disp = _mp_displacement(sys, comp)
        if disp is None:
            ys = list(xs)
        else:
            ys = [_mp_frac(a + b) for a, b in zip(xs, disp)]
        for n in range(n_max + 1):
            for j in range(d):
                base[n, j] = float(xs[j])
                other[n, j] = float(ys[j])
            dists[n] = float(_mp_distance(xs, ys))
            if n < n_max:
                xs = _mp_step(sys, xs)
                ys = _mp_step(sys, ys)
    # Float snapshots of [0,1) values can round up to exactly 1.0; fold back.
    base[base >= 1.0] = 0.0
    other[other >= 1.0] = 0.0
    return PairedOrbit(base=base, companion=other, distances=dists, precision_bits=prec)
