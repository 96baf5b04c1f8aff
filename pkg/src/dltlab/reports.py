"""Machine-readable reports: JSON envelopes and CSV sample dumps.

Every run produces one JSON report.  Result rows share a fixed schema —
``{experiment, seed, N, n_samples, estimate, target, deviation,
std_error, pass}`` — and the envelope embeds the fully resolved config
and the artifact version, so a report is self-describing and a rerun of
the same (config, seed) is byte-identical regardless of worker count.

Multi-row experiments disambiguate rows through the ``experiment`` field
(``name:lambda1``, ``name:re`` and so on).  Rows where a field has no
meaningful value (the spectral-gap row has no target) carry ``null``.
Hypothesis reports replace ``rows`` with ``sections``: one entry per
hypothesis with status pass / fail / not-applicable and witness numbers.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import __version__
from .cocycle import LyapunovEstimate
from .stats import (
    CharFnResult,
    ConditionalDltResult,
    MixingCorrelationResult,
    MixingDltResult,
    PlainDltResult,
)
from .zorich import ZorichSpectrum

__all__ = [
    "rows_for_plain",
    "rows_for_conditional",
    "rows_for_mixing",
    "rows_for_correlation",
    "rows_for_char_fn",
    "rows_for_spectrum",
    "rows_for_zorich",
    "build_envelope",
    "build_section_envelope",
    "render_json",
    "render_samples_csv",
]

_KS_FLOOR = 0.02
_KS_SES = 5.0


def _row(
    experiment: str,
    seed: int,
    n: int | None,
    n_samples: int,
    estimate: float | None,
    target: float | None,
    deviation: float | None,
    std_error: float | None,
    passed: bool,
) -> dict:
    return {
        "experiment": experiment,
        "seed": seed,
        "N": n,
        "n_samples": n_samples,
        "estimate": estimate,
        "target": target,
        "deviation": deviation,
        "std_error": std_error,
        "pass": bool(passed),
    }


def _ks_tolerance(n_samples: int, override: float | None) -> float:
    if override is not None:
        return override
    return max(_KS_FLOOR, _KS_SES / math.sqrt(n_samples))


def rows_for_plain(
    name: str, seed: int, result: PlainDltResult, tolerance: float | None
) -> list[dict]:
    rows = []
    for pt in result.points:
        tol = _ks_tolerance(pt.n_samples, tolerance)
        rows.append(
            _row(
                name,
                seed,
                pt.n_steps,
                pt.n_samples,
                pt.ks,
                0.0,
                pt.ks,
                1.0 / math.sqrt(pt.n_samples),
                pt.ks <= tol,
            )
        )
    return rows


def rows_for_conditional(name: str, seed: int, r: ConditionalDltResult) -> list[dict]:
    return [
        _row(
            name,
            seed,
            r.n_steps,
            r.n_samples,
            r.estimate,
            r.target,
            r.deviation,
            r.std_error,
            r.passed,
        )
    ]


def rows_for_mixing(name: str, seed: int, r: MixingDltResult) -> list[dict]:
    return [
        _row(
            name,
            seed,
            r.n_steps,
            r.n_samples,
            r.estimate,
            r.target,
            r.deviation,
            r.std_error,
            r.passed,
        )
    ]


def rows_for_correlation(
    name: str, seed: int, result: MixingCorrelationResult, tolerance: float | None
) -> list[dict]:
    rows = []
    for pt in result.points:
        tol = tolerance if tolerance is not None else max(_KS_FLOOR, _KS_SES * pt.std_error)
        rows.append(
            _row(
                name,
                seed,
                pt.n_steps,
                result.n_samples,
                pt.estimate,
                pt.target,
                pt.deviation,
                pt.std_error,
                pt.deviation <= tol,
            )
        )
    return rows


def rows_for_char_fn(
    name: str, seed: int, r: CharFnResult, tolerance: float | None
) -> list[dict]:
    parts = (
        (f"{name}:re", r.estimate.real, r.target.real, r.se_real),
        (f"{name}:im", r.estimate.imag, r.target.imag, r.se_imag),
    )
    rows = []
    for label, est, tgt, se in parts:
        dev = abs(est - tgt)
        tol = tolerance if tolerance is not None else max(_KS_FLOOR, _KS_SES * se)
        rows.append(_row(label, seed, r.n_steps, r.n_samples, est, tgt, dev, se, dev <= tol))
    return rows


def rows_for_spectrum(
    name: str,
    seed: int,
    est: LyapunovEstimate,
    expected: tuple[float, ...] | None,
    expected_tolerance: float,
    check_sum_zero: bool,
) -> list[dict]:
    rows = []
    for i, (lam, se, conv) in enumerate(
        zip(est.exponents, est.std_errors, est.converged)
    ):
        if expected is not None:
            target = expected[i]
            dev = abs(lam - target)
            passed = conv and dev <= expected_tolerance
        else:
            target, dev, passed = None, None, conv
        rows.append(
            _row(
                f"{name}:lambda{i + 1}",
                seed,
                est.n_steps,
                est.n_orbits,
                lam,
                target,
                dev,
                se,
                passed,
            )
        )
    if check_sum_zero:
        per_orbit_sums = est.per_orbit.sum(axis=1)
        total = float(np.mean(per_orbit_sums))
        se = (
            float(np.std(per_orbit_sums, ddof=1) / math.sqrt(len(per_orbit_sums)))
            if len(per_orbit_sums) > 1
            else 0.0
        )
        rows.append(
            _row(
                f"{name}:sum",
                seed,
                est.n_steps,
                est.n_orbits,
                total,
                0.0,
                abs(total),
                se,
                abs(total) <= 3.0 * se,
            )
        )
    return rows


def rows_for_zorich(
    name: str,
    seed: int,
    est: ZorichSpectrum,
    check_symmetry: bool,
    gap_ses: float,
) -> list[dict]:
    rows = []
    d = len(est.exponents)
    for i, (theta, se, conv) in enumerate(
        zip(est.exponents, est.std_errors, est.converged)
    ):
        rows.append(
            _row(
                f"{name}:theta{i + 1}",
                seed,
                est.n_steps,
                est.n_orbits_used,
                theta,
                None,
                None,
                se,
                conv,
            )
        )
    if check_symmetry:
        n_used = est.per_orbit.shape[0]
        for i in range(d // 2):
            j = d - 1 - i
            pair = est.per_orbit[:, i] + est.per_orbit[:, j]
            total = float(np.mean(pair))
            se = (
                float(np.std(pair, ddof=1) / math.sqrt(n_used)) if n_used > 1 else 0.0
            )
            rows.append(
                _row(
                    f"{name}:pair{i + 1}",
                    seed,
                    est.n_steps,
                    n_used,
                    total,
                    0.0,
                    abs(total),
                    se,
                    abs(total) <= 3.0 * se,
                )
            )
    if d >= 2:
        n_used = est.per_orbit.shape[0]
        gaps = est.per_orbit[:, 0] - est.per_orbit[:, 1]
        gap = float(np.mean(gaps))
        se = float(np.std(gaps, ddof=1) / math.sqrt(n_used)) if n_used > 1 else 0.0
        rows.append(
            _row(
                f"{name}:gap",
                seed,
                est.n_steps,
                n_used,
                gap,
                None,
                None,
                se,
                gap > gap_ses * se,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# envelopes


def build_envelope(
    name: str,
    kind: str,
    seed: int,
    resolved_config: dict[str, dict[str, str]],
    rows: list[dict],
    flags: list[str] | None = None,
    calibration: dict[str, float] | None = None,
) -> dict:
    env = {
        "artifact": {"name": "dltlab", "version": __version__},
        "experiment": name,
        "kind": kind,
        "seed": seed,
        "config": resolved_config,
    }
    if calibration:
        env["calibration"] = calibration
    env["flags"] = list(flags or [])
    env["rows"] = rows
    env["all_pass"] = all(r["pass"] for r in rows) if rows else False
    return env


def build_section_envelope(
    name: str,
    kind: str,
    seed: int,
    resolved_config: dict[str, dict[str, str]],
    sections: list[dict],
) -> dict:
    """Envelope for hypothesis diagnostics: sections instead of rows."""
    failed = [s["section"] for s in sections if s["status"] == "fail"]
    return {
        "artifact": {"name": "dltlab", "version": __version__},
        "experiment": name,
        "kind": kind,
        "seed": seed,
        "config": resolved_config,
        "sections": sections,
        "all_pass": not failed,
    }


def render_json(envelope: dict) -> str:
    """Serialize with a stable layout; floats use shortest-roundtrip repr."""
    return json.dumps(envelope, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def render_samples_csv(header: str, values: np.ndarray) -> str:
    lines = [f"sample_index,{header}"]
    for i, v in enumerate(values):
        lines.append(f"{i},{float(v)!r}")
    return "\n".join(lines) + "\n"
