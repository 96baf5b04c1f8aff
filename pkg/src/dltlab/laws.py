"""Reference limit laws for normalized Birkhoff and cocycle sums."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, DomainError

__all__ = ["ReferenceLaw", "gaussian_law", "dirac_law", "empirical_law"]


@dataclass(frozen=True)
class ReferenceLaw:
    """A limit law: centered gaussian, point mass at zero, or empirical.

    gaussian with variance 0 degenerates to the point mass.
    """

    kind: str  # 'gaussian' | 'dirac_at_zero' | 'empirical'
    variance: float = 0.0
    samples: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("gaussian", "dirac_at_zero", "empirical"):
            raise ConfigurationError(f"unknown law kind {self.kind!r}")
        if self.kind == "gaussian" and self.variance < 0:
            raise ConfigurationError("gaussian variance must be nonnegative")
        if self.kind == "empirical" and len(self.samples) == 0:
            raise ConfigurationError("empirical law needs samples")

    @property
    def is_atomic_at_zero(self) -> bool:
        return self.kind == "dirac_at_zero" or (
            self.kind == "gaussian" and self.variance == 0.0
        )

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.is_atomic_at_zero:
            return (x >= 0.0).astype(np.float64)
        if self.kind == "gaussian":
            return ndtr(x / np.sqrt(self.variance))
        samples = np.sort(np.asarray(self.samples))
        return np.searchsorted(samples, x, side="right") / len(samples)

    def mass(self, a: float, b: float) -> float:
        """P(S in (a, b)) for an open interval; endpoints may be infinite."""
        if not a < b:
            raise DomainError("interval endpoints must satisfy a < b")
        if self.is_atomic_at_zero:
            if a == 0.0 or b == 0.0:
                raise DomainError("interval endpoint sits on the point mass")
            return 1.0 if a < 0.0 < b else 0.0
        if self.kind == "gaussian":
            s = np.sqrt(self.variance)
            hi = 1.0 if b == np.inf else float(ndtr(b / s))
            lo = 0.0 if a == -np.inf else float(ndtr(a / s))
            return hi - lo
        samples = np.asarray(self.samples)
        return float(np.mean((samples > a) & (samples < b)))

    def char_fn(self, t: float) -> complex:
        """E(exp(i t S))."""
        if self.is_atomic_at_zero:
            return 1.0 + 0.0j
        if self.kind == "gaussian":
            return complex(np.exp(-self.variance * t * t / 2.0), 0.0)
        samples = np.asarray(self.samples)
        return complex(np.mean(np.exp(1j * t * samples)))


def gaussian_law(variance: float) -> ReferenceLaw:
    return ReferenceLaw(kind="gaussian", variance=float(variance))


def dirac_law() -> ReferenceLaw:
    return ReferenceLaw(kind="dirac_at_zero")


def empirical_law(samples) -> ReferenceLaw:
    return ReferenceLaw(kind="empirical", samples=tuple(float(s) for s in samples))
