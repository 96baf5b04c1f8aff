"""Config-driven experiment runner.

Usage:

    dltlab run <config-or-preset> [--out DIR] [--seed U64] [--workers N]
                                  [--dump-samples]
    dltlab check <config-or-preset> [--out DIR] [--seed U64] [--workers N]

``run`` executes the configured experiment and writes
``<name>.report.json`` to the output directory (plus
``<name>.samples-n<N>.csv`` per orbit length under ``--dump-samples``).
``check`` ignores the experiment kind and runs the hypothesis
diagnostics for the configured system / cocycle pair, one report section
per hypothesis with status pass / fail / not-applicable.

The config argument is a file path, or ``preset/<id>`` naming a shipped
preset (``dltlab run preset/3``); a few presets also answer to mnemonic
aliases such as ``preset/bernoulli_clt``.

Exit codes: 0 — every pass flag true; 1 — the run completed but a
deviation exceeded its budget; 2 — configuration error (the message
names the offending section, key, or value); 3 — numerical diagnostic
failure (estimator non-convergence, failed hypothesis section, or an
aborted induction run).

Reports embed the resolved config and are byte-identical for a given
(config, seed) whatever ``--workers`` says; the flag only changes wall
time.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources

import numpy as np

from .birkhoff import NormalizingScheme, adaptedness_profile, constant_observable
from .cocycle import (
    boundedness_check,
    cocycle_adaptedness_profile,
    dominated_splitting_profile,
    lyapunov_spectrum,
    sample_directions,
    section_genericity_profile,
    strong_splitting_profile,
)
from .config import ExperimentConfig, HypothesisSpec, parse_config, parse_config_text
from .dynamics import contraction_profile, sample_batch
from .errors import (
    ConfigurationError,
    DiagnosticError,
    DltlabError,
    DomainError,
    NonGenericIETError,
    OverflowGuardError,
)
from .identities import (
    composition_identity_check,
    renorm_transparency_check,
    time_reversal_check,
    top_wedge_det_check,
)
from .laws import dirac_law, gaussian_law
from .reports import (
    build_envelope,
    build_section_envelope,
    render_json,
    render_samples_csv,
    rows_for_char_fn,
    rows_for_conditional,
    rows_for_correlation,
    rows_for_mixing,
    rows_for_plain,
    rows_for_spectrum,
    rows_for_zorich,
)
from .stats import (
    CocycleVectorSource,
    ObservableSource,
    OperatorNormSource,
    SectionSource,
    estimate_conditional_dlt,
    estimate_mixing_correlation,
    estimate_mixing_dlt,
    estimate_plain_dlt,
    char_fn_estimate,
    variance_green_kubo,
)
from .streams import Stream
from .zorich import zorich_spectrum

__all__ = ["main"]

_CHUNK = 4096  # dump chunking; must match the estimators' chunk size
_PRESET_ALIASES = {
    "identities": "1",
    "shear_lln": "2",
    "bernoulli_clt": "3",
    "conditional_clt": "4",
    "cat_mixing_clt": "5",
    "cat_mixing_correlation": "6",
    "hypothesis_diagnostics": "7",
    "spectra": "8",
    "zorich": "9",
    "determinism": "10",
}


# ---------------------------------------------------------------------------
# config / preset loading


def _load_config(arg: str, seed_override: int | None) -> ExperimentConfig:
    if arg.startswith("preset/"):
        key = arg.split("/", 1)[1]
        key = _PRESET_ALIASES.get(key, key)
        res = resources.files("dltlab").joinpath("presets").joinpath(f"{key}.cfg")
        if not res.is_file():
            known = ", ".join(str(i) for i in range(1, 11))
            raise ConfigurationError(
                f"unknown preset {arg!r}; shipped presets are preset/{{{known}}} "
                f"and aliases {', '.join(sorted(_PRESET_ALIASES))}"
            )
        return parse_config_text(res.read_text(encoding="utf-8"), seed_override)
    return parse_config(arg, seed_override)


def _require_seed(cfg: ExperimentConfig) -> int:
    if cfg.seed is None:
        raise ConfigurationError("no seed: set [experiment] seed or pass --seed")
    return cfg.seed


# ---------------------------------------------------------------------------
# scheme calibration (sentinel resolution)


def _resolve_scheme(
    cfg: ExperimentConfig, stream: Stream, workers: int
) -> tuple[NormalizingScheme, dict, list[str]]:
    spec = cfg.scheme_spec
    calibration: dict[str, float] = {}
    flags: list[str] = []

    mean = spec.mean
    if mean == "spectrum":
        est = lyapunov_spectrum(
            cfg.cocycle,
            stream.child("calibration").child("spectrum"),
            n_orbits=spec.spectrum_orbits,
            n_steps=spec.spectrum_steps,
        )
        mean = est.top
        calibration["mean_from_spectrum"] = est.top
        calibration["spectrum_std_error"] = est.std_errors[0]
        if not est.converged[0]:
            flags.append("calibration_spectrum_unconverged")

    variance = spec.variance
    if variance == "green_kubo":
        gk = variance_green_kubo(
            cfg.sys,
            cfg.observable,
            spec.gk_lag_max,
            spec.gk_samples,
            stream.child("calibration").child("green_kubo"),
            workers,
        )
        variance = gk.variance
        calibration["variance_green_kubo"] = gk.variance
        calibration["gk_tail_fraction"] = gk.tail_fraction
        if not gk.tail_ok:
            flags.append("gk_tail_suspect")
        if gk.clamped:
            flags.append("gk_variance_clamped")

    law = gaussian_law(float(variance)) if spec.law == "gaussian" else dirac_law()
    scheme = NormalizingScheme(
        averaging=spec.averaging,
        normalizing=spec.normalizing,
        law=law,
        mean=float(mean) if spec.averaging == "mean" else 0.0,
    )
    return scheme, calibration, flags


def _build_source(cfg: ExperimentConfig, scheme: NormalizingScheme):
    if cfg.source_kind == "observable":
        return ObservableSource(cfg.sys, cfg.observable, scheme)
    if cfg.source_kind == "vector":
        return CocycleVectorSource(cfg.cocycle, scheme)
    if cfg.source_kind == "operator_norm":
        return OperatorNormSource(cfg.cocycle, scheme)
    if cfg.source_kind == "section":
        return SectionSource(cfg.cocycle, cfg.section, scheme)
    raise ConfigurationError(f"kind {cfg.kind!r} needs an [observable] or [cocycle] section")


# ---------------------------------------------------------------------------
# run


def _dump_csvs(cfg: ExperimentConfig, source, stream: Stream) -> dict[str, str]:
    """Re-derive each experiment's sample column, chunk by chunk.

    Uses the same stream children and chunk ranges as the estimators, so
    the dumped values are exactly the ones the estimate consumed (raw
    log-expansions for cocycle routes, corrected sums for observables).
    """
    out = {}
    for n_steps in cfg.n_list:
        sub = stream.child(f"n{n_steps}")
        vals = np.empty(cfg.n_samples)
        for first in range(0, cfg.n_samples, _CHUNK):
            count = min(_CHUNK, cfg.n_samples - first)
            vals[first : first + count] = source.dump_values(sub, first, count, n_steps)
        out[f"{cfg.name}.samples-n{n_steps}.csv"] = render_samples_csv(
            source.dump_header, vals
        )
    return out


def _run_experiment(
    cfg: ExperimentConfig, workers: int, dump: bool
) -> tuple[dict, dict[str, str], bool]:
    """Returns (envelope, csv files, diagnostic_failure)."""
    seed = _require_seed(cfg)
    stream = Stream(seed)
    kind = cfg.kind
    csvs: dict[str, str] = {}
    diagnostic = False

    if kind == "hypothesis_check":
        sections = _hypothesis_sections(cfg, stream)
        env = build_section_envelope(cfg.name, kind, seed, cfg.resolved, sections)
        return env, {}, any(s["status"] == "fail" for s in sections)

    if kind == "zorich_spectrum":
        z = cfg.zorich
        est = zorich_spectrum(z.permutation, stream, z.n_orbits, z.n_steps)
        rows = rows_for_zorich(cfg.name, seed, est, z.check_symmetry, z.gap_ses)
        diagnostic = not all(est.converged)
        flags = []
        if est.n_orbits_used < est.n_orbits_requested:
            flags.append("zorich_orbits_dropped")
        env = build_envelope(cfg.name, kind, seed, cfg.resolved, rows, flags)
        return env, {}, diagnostic

    if kind == "spectrum":
        sp = cfg.spectrum
        est = lyapunov_spectrum(
            cfg.cocycle,
            stream,
            n_orbits=sp.n_orbits,
            n_steps=sp.n_steps,
            qr_period=sp.qr_period,
        )
        rows = rows_for_spectrum(
            cfg.name, seed, est, sp.expected, sp.expected_tolerance, sp.check_sum_zero
        )
        diagnostic = not all(est.converged)
        env = build_envelope(cfg.name, kind, seed, cfg.resolved, rows)
        return env, {}, diagnostic

    if kind == "mixing_correlation":
        result = estimate_mixing_correlation(
            cfg.sys, cfg.event_a, cfg.event_b, cfg.n_list, cfg.n_samples, stream, workers
        )
        rows = rows_for_correlation(cfg.name, seed, result, cfg.tolerance)
        env = build_envelope(cfg.name, kind, seed, cfg.resolved, rows)
        return env, {}, False

    # the remaining kinds sample normalized sums through a source
    scheme, calibration, flags = _resolve_scheme(cfg, stream, workers)
    source = _build_source(cfg, scheme)

    if kind == "plain_dlt":
        result = estimate_plain_dlt(source, cfg.n_list, cfg.n_samples, stream, workers)
        rows = rows_for_plain(cfg.name, seed, result, cfg.tolerance)
    elif kind == "conditional_dlt":
        result = estimate_conditional_dlt(
            source,
            cfg.event_a,
            cfg.iv,
            cfg.n_list[0],
            cfg.n_samples,
            stream,
            workers,
            cfg.tolerance,
        )
        rows = rows_for_conditional(cfg.name, seed, result)
    elif kind == "mixing_dlt":
        result = estimate_mixing_dlt(
            source,
            cfg.event_a,
            cfg.event_b,
            cfg.iv,
            cfg.n_list[0],
            cfg.n_samples,
            stream,
            workers,
            cfg.tolerance,
            companion=cfg.companion,
        )
        rows = rows_for_mixing(cfg.name, seed, result)
        if result.companion_missing:
            flags = flags + ["companion_missing"]
    elif kind == "char_fn":
        if cfg.char_weight == "event_a":
            weight = cfg.event_a
        elif cfg.char_weight == "observable":
            weight = cfg.observable
        else:
            weight = constant_observable(1.0)
        result = char_fn_estimate(
            source, cfg.char_t, weight, cfg.n_list[0], cfg.n_samples, stream, workers
        )
        rows = rows_for_char_fn(cfg.name, seed, result, cfg.tolerance)
    else:  # pragma: no cover - the parser rejects unknown kinds first
        raise ConfigurationError(f"unknown experiment kind {kind!r}")

    if dump:
        csvs = _dump_csvs(cfg, source, stream)
    env = build_envelope(cfg.name, kind, seed, cfg.resolved, rows, flags, calibration)
    return env, csvs, diagnostic


# ---------------------------------------------------------------------------
# hypothesis diagnostics (the `check` command and the hypothesis_check kind)


def _section(section: str, status: str, witness: dict) -> dict:
    return {"section": section, "status": status, "witness": witness}


def _not_applicable(section: str, why: str) -> dict:
    return _section(section, "not_applicable", {"reason": why})


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _hypothesis_sections(cfg: ExperimentConfig, stream: Stream) -> list[dict]:
    hyp = cfg.hyp if cfg.hyp is not None else HypothesisSpec()
    sections: list[dict] = []
    sub = stream.child("hypothesis")

    scheme = None
    if cfg.scheme_spec is not None:
        scheme, _, _ = _resolve_scheme(cfg, sub.child("scheme"), 1)

    # -- pair contraction --------------------------------------------------
    if cfg.companion is None:
        sections.append(_not_applicable("contraction", "no companion map configured"))
    elif cfg.sys.kind == "two_sided_shift":
        sections.append(_not_applicable("contraction", "companion pairs need a torus system"))
    else:
        pts = sample_batch(cfg.sys, sub.child("contraction"), 0, 4)
        slopes, finals, ok = [], [], True
        for i in range(len(pts)):
            prof = contraction_profile(cfg.sys, cfg.companion, pts.point(i), hyp.contraction_steps)
            ok = ok and prof.contracting
            finals.append(prof.final_distance)
            if prof.slope is not None:
                slopes.append(prof.slope)
        witness = {
            "n_points": len(pts),
            "n_steps": hyp.contraction_steps,
            "slopes": slopes,
            "max_final_distance": max(finals),
        }
        sections.append(_section("contraction", _status(ok), witness))

    # -- observable adaptedness ---------------------------------------------
    if cfg.observable is None or cfg.companion is None:
        sections.append(
            _not_applicable("observable_adaptedness", "needs an observable and a companion")
        )
    elif cfg.sys.kind == "two_sided_shift":
        sections.append(
            _not_applicable("observable_adaptedness", "companion pairs need a torus system")
        )
    else:
        n_max = min(hyp.profile_steps, 10_000)
        pts = sample_batch(cfg.sys, sub.child("adaptedness"), 0, 4)
        growths, ok = [], True
        for i in range(len(pts)):
            prof = adaptedness_profile(
                cfg.sys, cfg.observable, cfg.companion, pts.point(i), n_max, scheme
            )
            ok = ok and prof.bounded
            growths.append(prof.tail_increase)
        witness = {
            "n_points": len(pts),
            "n_steps": n_max,
            "max_tail_increase": max(growths),
        }
        sections.append(_section("observable_adaptedness", _status(ok), witness))

    # -- cocycle-specific hypotheses -----------------------------------------
    coc = cfg.cocycle
    if coc is None:
        for name in (
            "cocycle_boundedness",
            "dominated_splitting",
            "strong_splitting",
            "section_genericity",
            "cocycle_adaptedness",
        ):
            sections.append(_not_applicable(name, "no cocycle configured"))
    else:
        rep = boundedness_check(coc, sub.child("boundedness"), hyp.boundedness_samples)
        sections.append(
            _section(
                "cocycle_boundedness",
                _status(rep.passed),
                {
                    "max_forward": rep.max_forward,
                    "max_backward": rep.max_backward,
                    "declared_bound": rep.declared_bound,
                    "n_samples": rep.n_samples,
                },
            )
        )

        n_dirs = hyp.n_directions
        pts = sample_batch(coc.sys, sub.child("splitting-points"), 0, n_dirs)
        pairs = sample_directions(sub.child("splitting-dirs"), 0, 2 * n_dirs, coc.dim)
        worst_dom, ok_dom = 0.0, True
        worst_str, ok_str = 0.0, True
        for i in range(n_dirs):
            v, w = pairs[2 * i], pairs[2 * i + 1]
            dom = dominated_splitting_profile(coc, pts.point(i), v, w, hyp.profile_steps)
            ok_dom = ok_dom and dom.bounded
            worst_dom = max(worst_dom, dom.decade_growth)
            sig = strong_splitting_profile(coc, pts.point(i), v, hyp.profile_steps)
            ok_str = ok_str and sig.bounded
            worst_str = max(worst_str, sig.decade_growth)
        common = {"n_directions": n_dirs, "n_steps": hyp.profile_steps}
        sections.append(
            _section(
                "dominated_splitting",
                _status(ok_dom),
                dict(common, max_decade_growth=worst_dom),
            )
        )
        sections.append(
            _section(
                "strong_splitting",
                _status(ok_str),
                dict(common, max_decade_growth=worst_str),
            )
        )

        if cfg.section is None:
            sections.append(_not_applicable("section_genericity", "no section configured"))
        else:
            pts = sample_batch(coc.sys, sub.child("section-points"), 0, 8)
            worst, ok = 0.0, True
            for i in range(len(pts)):
                prof = section_genericity_profile(coc, cfg.section, pts.point(i), hyp.profile_steps)
                ok = ok and prof.bounded
                worst = max(worst, prof.decade_growth)
            sections.append(
                _section(
                    "section_genericity",
                    _status(ok),
                    {"n_points": len(pts), "n_steps": hyp.profile_steps, "max_decade_growth": worst},
                )
            )

        comp = cfg.cocycle_companion
        if comp is None:
            sections.append(_not_applicable("cocycle_adaptedness", "no companion map configured"))
        elif coc.sys.kind == "two_sided_shift":
            sections.append(
                _not_applicable("cocycle_adaptedness", "companion pairs need a torus base")
            )
        else:
            n_max = min(hyp.profile_steps, 10_000)
            pts = sample_batch(coc.sys, sub.child("pair-points"), 0, 4)
            dirs = sample_directions(sub.child("pair-dirs"), 0, 4, coc.dim)
            worst, ok = 0.0, True
            for i in range(len(pts)):
                prof = cocycle_adaptedness_profile(coc, comp, pts.point(i), dirs[i], n_max)
                ok = ok and prof.bounded
                worst = max(worst, prof.decade_growth)
            sections.append(
                _section(
                    "cocycle_adaptedness",
                    _status(ok),
                    {"n_points": len(pts), "n_steps": n_max, "max_decade_growth": worst},
                )
            )

    # -- exact identities -----------------------------------------------------
    if not hyp.identities:
        sections.append(_not_applicable("exact_identities", "disabled (identities = false)"))
    elif coc is None and (cfg.observable is None or scheme is None):
        sections.append(
            _not_applicable("exact_identities", "needs a cocycle or an observable with a scheme")
        )
    else:
        witness: dict = {}
        ok = True
        if coc is not None:
            comp_chk = composition_identity_check(
                coc, sub.child("id-composition"), hyp.identity_cases, hyp.identity_span
            )
            wedge_chk = top_wedge_det_check(coc, sub.child("id-wedge"))
            renorm_chk = renorm_transparency_check(coc, sub.child("id-renorm"))
            for chk in (comp_chk, wedge_chk, renorm_chk):
                witness[f"{chk.name}_max_error"] = chk.max_error
                ok = ok and chk.passed
        if cfg.observable is not None and scheme is not None:
            rev_chk = time_reversal_check(
                cfg.sys, cfg.observable, scheme, sub.child("id-reversal")
            )
            witness[f"{rev_chk.name}_max_error"] = rev_chk.max_error
            ok = ok and rev_chk.passed
        sections.append(_section("exact_identities", _status(ok), witness))

    return sections


def _check_config(cfg: ExperimentConfig) -> tuple[dict, bool]:
    seed = _require_seed(cfg)
    if cfg.sys is None and cfg.cocycle is None:
        raise ConfigurationError("check needs a config with a [system] or [cocycle] section")
    stream = Stream(seed)
    sections = _hypothesis_sections(cfg, stream)
    env = build_section_envelope(cfg.name, "hypothesis_check", seed, cfg.resolved, sections)
    return env, any(s["status"] == "fail" for s in sections)


# ---------------------------------------------------------------------------
# entry point


def _write(out_dir: str, filename: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dltlab",
        description="Monte Carlo experiments on distributional limit theorems",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, help_text in (
        ("run", "execute the configured experiment and write its report"),
        ("check", "run the hypothesis diagnostics for the configured pair"),
    ):
        sp = sub.add_parser(cmd, help=help_text)
        sp.add_argument("config", help="config file path or preset/<id>")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--seed", type=int, default=None, help="override [experiment] seed")
        sp.add_argument("--workers", type=int, default=1, help="sampling worker threads")
        if cmd == "run":
            sp.add_argument(
                "--dump-samples",
                action="store_true",
                help="also write per-N CSVs of the sampled values",
            )
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        cfg = _load_config(args.config, args.seed)
        if args.command == "check":
            env, failed = _check_config(cfg)
            path = _write(args.out, f"{cfg.name}.report.json", render_json(env))
            print(f"{'FAIL' if failed else 'PASS'} {path}")
            return 3 if failed else 0
        env, csvs, diagnostic = _run_experiment(cfg, args.workers, args.dump_samples)
        path = _write(args.out, f"{cfg.name}.report.json", render_json(env))
        for fname, text in csvs.items():
            _write(args.out, fname, text)
        ok = env["all_pass"]
        print(f"{'PASS' if ok else 'FAIL'} {path}")
        if diagnostic:
            print("diagnostic failure: estimate did not converge", file=sys.stderr)
            return 3
        return 0 if ok else 1
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DiagnosticError, NonGenericIETError, OverflowGuardError) as exc:
        print(f"diagnostic failure: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DltlabError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
