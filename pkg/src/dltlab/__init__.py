"""Numerical laboratory for distributional limit theorems over dynamical systems.

The package is organized around six concerns:

``dynamics``
    Concrete measure-preserving systems (toral automorphisms, two-sided
    shifts, torus translations), companion maps, metrics, and invariant
    sampling.
``birkhoff``
    Observables, normalizing schemes, compensated Birkhoff sums, and the
    time-reversal / companion-adaptedness diagnostics.
``cocycle``
    Matrix cocycles over a base system: products, vector and operator-norm
    growth, exterior powers, Lyapunov spectra, and splitting diagnostics.
``zorich``
    Interval exchange transformations, Rauzy-Veech induction, the Zorich
    acceleration, and Lyapunov spectra of the induction cocycle.
``stats``
    Empirical distributions, reference laws, events with exact masses, and
    the Monte Carlo estimators for plain / conditional / mixing limit laws.
``cli``
    A config-driven command line runner with reproducible reports.

All randomness flows through :class:`dltlab.streams.Stream`, a named,
splittable, counter-based generator: every sampled quantity is a pure
function of (seed, stream name, sample index), which makes reports
byte-identical regardless of how work is chunked across workers.
"""

__version__ = "0.1.0"

from . import (  # noqa: E402,F401
    birkhoff,
    cocycle,
    config,
    dynamics,
    identities,
    laws,
    orbitpair,
    reports,
    stats,
    streams,
    zorich,
)

__all__ = [
    "__version__",
    "birkhoff",
    "cocycle",
    "config",
    "dynamics",
    "identities",
    "laws",
    "orbitpair",
    "reports",
    "stats",
    "streams",
    "zorich",
]
