"""Strict sectioned configuration for experiment runs.

Configs are INI-style: ``[section]`` headers, ``key = value`` lines, ``#``
comments.  Parsing is strict — an unknown section or key is fatal and the
error names it, because a silently ignored knob would masquerade as a
failed limit theorem.  Value grammars are small and literal: vectors are
space-separated numbers, matrices separate rows with ``;``, booleans are
``true``/``false``.

Section layout (which sections apply depends on [experiment] kind):

    [experiment]   kind, name, seed
    [system]       base dynamical system and optional companion map
    [cocycle_system]  separate base for the cocycle (hypothesis_check only)
    [observable]   observable-driven source
    [cocycle]      cocycle-driven source, including exterior powers and the
                   vector / operator_norm / section sampling route
    [scheme]       averaging + normalizing sequences and the reference law;
                   mean = spectrum and variance = green_kubo request
                   calibration from a prior spectrum / covariance run
    [run]          n_samples, n_steps or n_list, optional tolerance
    [event_a]      initial-condition event (conditional / mixing kinds)
    [event_b]      terminal event (mixing kinds)
    [interval]     the open interval (a, b) of the limit statement
    [char_fn]      evaluation point t and weight choice
    [spectrum]     exponent-estimate controls and optional expected values
    [zorich]       interval-exchange induction controls
    [hypothesis_check]  profile lengths and toggles for the diagnostics
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

import numpy as np

from .birkhoff import (
    Observable,
    constant_observable,
    coordinate_cosine,
    coordinate_symbol,
)
from .cocycle import (
    CocycleGenerator,
    MatrixCocycle,
    Section,
    constant_generator,
    constant_section,
    exterior_power,
    smooth_torus_generator,
    symbol_table_generator,
    trig_section,
)
from .dynamics import (
    CompanionMap,
    PhaseSpaceSystem,
    identity_companion,
    stable_translation,
    torus_automorphism,
    torus_translation,
    translation_companion,
    two_sided_shift,
)
from .errors import ConfigurationError
from .stats import (
    Event,
    Interval,
    full_space,
    interval,
    projective_cap,
    shift_cylinder,
    torus_box,
)

__all__ = [
    "ExperimentConfig",
    "SchemeSpec",
    "SpectrumSpec",
    "ZorichSpec",
    "HypothesisSpec",
    "parse_config",
    "parse_config_text",
    "EXPERIMENT_KINDS",
]

EXPERIMENT_KINDS = (
    "plain_dlt",
    "conditional_dlt",
    "mixing_dlt",
    "mixing_correlation",
    "char_fn",
    "spectrum",
    "zorich_spectrum",
    "hypothesis_check",
)

_TABLE_KEY = re.compile(r"^table(\d+)$")

_SECTION_KEYS = {
    "experiment": {"kind", "name", "seed"},
    "system": {
        "kind",
        "matrix",
        "weights",
        "vector",
        "companion",
        "amplitude",
        "companion_vector",
    },
    "cocycle_system": {
        "kind",
        "matrix",
        "weights",
        "vector",
        "companion",
        "amplitude",
        "companion_vector",
    },
    "observable": {"kind", "frequency", "index", "value"},
    "cocycle": {
        "kind",
        "matrix",
        "base",
        "cos",
        "sin",
        "frequency",
        "renorm_period",
        "exterior_power",
        "source",
        "section_kind",
        "section_u",
        "section_w",
        "section_frequency",
    },
    "scheme": {
        "averaging",
        "mean",
        "normalizing",
        "law",
        "variance",
        "spectrum_orbits",
        "spectrum_steps",
        "gk_lag_max",
        "gk_samples",
    },
    "run": {"n_samples", "n_steps", "n_list", "tolerance"},
    "event_a": {"kind", "lower", "upper", "first_index", "symbols", "center", "angle"},
    "event_b": {"kind", "lower", "upper", "first_index", "symbols", "center", "angle"},
    "interval": {"a", "b"},
    "char_fn": {"t", "weight"},
    "spectrum": {
        "n_orbits",
        "n_steps",
        "qr_period",
        "expected",
        "expected_tolerance",
        "check_sum_zero",
    },
    "zorich": {"permutation", "n_orbits", "n_steps", "check_symmetry", "gap_ses"},
    "hypothesis_check": {
        "contraction_steps",
        "profile_steps",
        "n_directions",
        "boundedness_samples",
        "identities",
        "identity_cases",
        "identity_span",
    },
}

# (required sections, optional sections) per experiment kind
_KIND_SECTIONS = {
    "plain_dlt": (
        {"experiment", "system", "run", "scheme"},
        {"observable", "cocycle"},
    ),
    "conditional_dlt": (
        {"experiment", "system", "run", "scheme", "event_a", "interval"},
        {"observable", "cocycle"},
    ),
    "mixing_dlt": (
        {"experiment", "system", "run", "scheme", "event_a", "event_b", "interval"},
        {"observable", "cocycle"},
    ),
    "mixing_correlation": (
        {"experiment", "system", "run", "event_a", "event_b"},
        set(),
    ),
    "char_fn": (
        {"experiment", "system", "run", "scheme", "char_fn"},
        {"observable", "cocycle", "event_a"},
    ),
    "spectrum": (
        {"experiment", "system", "cocycle", "spectrum"},
        set(),
    ),
    "zorich_spectrum": (
        {"experiment", "zorich"},
        set(),
    ),
    "hypothesis_check": (
        {"experiment", "system"},
        {"hypothesis_check", "cocycle_system", "observable", "cocycle", "scheme"},
    ),
}


# ---------------------------------------------------------------------------
# value grammars


def _fail(section: str, key: str, why: str) -> ConfigurationError:
    return ConfigurationError(f"[{section}] {key}: {why}")


def _parse_int(section: str, key: str, text: str) -> int:
    try:
        return int(text.strip(), 10)
    except ValueError:
        raise _fail(section, key, f"expected an integer, got {text!r}") from None


def _parse_float(section: str, key: str, text: str) -> float:
    try:
        v = float(text.strip())
    except ValueError:
        raise _fail(section, key, f"expected a number, got {text!r}") from None
    if v != v:
        raise _fail(section, key, "nan is not a valid value")
    return v


def _parse_bool(section: str, key: str, text: str) -> bool:
    t = text.strip().lower()
    if t == "true":
        return True
    if t == "false":
        return False
    raise _fail(section, key, f"expected true or false, got {text!r}")


def _parse_vector(section: str, key: str, text: str) -> tuple[float, ...]:
    parts = text.split()
    if not parts:
        raise _fail(section, key, "expected a space-separated vector")
    return tuple(_parse_float(section, key, p) for p in parts)


def _parse_int_vector(section: str, key: str, text: str) -> tuple[int, ...]:
    parts = text.split()
    if not parts:
        raise _fail(section, key, "expected a space-separated integer vector")
    return tuple(_parse_int(section, key, p) for p in parts)


def _parse_matrix(section: str, key: str, text: str) -> np.ndarray:
    rows = [r for r in (part.strip() for part in text.split(";")) if r]
    if not rows:
        raise _fail(section, key, "expected rows separated by ';'")
    parsed = [_parse_vector(section, key, r) for r in rows]
    width = len(parsed[0])
    if any(len(r) != width for r in parsed):
        raise _fail(section, key, "matrix rows have unequal lengths")
    return np.asarray(parsed, dtype=np.float64)


# ---------------------------------------------------------------------------
# resolved specs


@dataclass(frozen=True)
class SchemeSpec:
    """Scheme description with possibly deferred calibration constants.

    ``mean`` is a float or the sentinel string ``"spectrum"`` (top exponent
    from a calibration spectrum run); ``variance`` is a float or
    ``"green_kubo"`` (summed autocovariance from a calibration run).
    """

    averaging: str = "mean"
    mean: float | str = 0.0
    normalizing: str = "sqrt"
    law: str = "gaussian"
    variance: float | str = 1.0
    spectrum_orbits: int = 16
    spectrum_steps: int = 20_000
    gk_lag_max: int = 32
    gk_samples: int = 200_000


@dataclass(frozen=True)
class SpectrumSpec:
    n_orbits: int
    n_steps: int
    qr_period: int | None = None
    expected: tuple[float, ...] | None = None
    expected_tolerance: float = 1e-6
    check_sum_zero: bool = False


@dataclass(frozen=True)
class ZorichSpec:
    permutation: tuple[int, ...]
    n_orbits: int
    n_steps: int
    check_symmetry: bool = True
    gap_ses: float = 5.0


@dataclass(frozen=True)
class HypothesisSpec:
    contraction_steps: int = 400
    profile_steps: int = 10_000
    n_directions: int = 100
    boundedness_samples: int = 4096
    identities: bool = False
    identity_cases: int = 1000
    identity_span: int = 40


@dataclass
class ExperimentConfig:
    """A fully validated experiment: built components plus the echo text."""

    kind: str
    name: str
    seed: int | None
    sys: PhaseSpaceSystem | None = None
    companion: CompanionMap | None = None
    cocycle_sys: PhaseSpaceSystem | None = None
    cocycle_companion: CompanionMap | None = None
    observable: Observable | None = None
    cocycle: MatrixCocycle | None = None
    section: Section | None = None
    source_kind: str | None = None  # observable | vector | operator_norm | section
    scheme_spec: SchemeSpec | None = None
    n_list: tuple[int, ...] = ()
    n_samples: int = 0
    tolerance: float | None = None
    event_a: Event | None = None
    event_b: Event | None = None
    iv: Interval | None = None
    char_t: float = 0.0
    char_weight: str = "none"  # none | event_a | observable
    spectrum: SpectrumSpec | None = None
    zorich: ZorichSpec | None = None
    hyp: HypothesisSpec | None = None
    resolved: dict[str, dict[str, str]] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# section builders


def _build_system(sec: str, items: dict[str, str]) -> tuple[PhaseSpaceSystem, CompanionMap | None]:
    kind = items.get("kind")
    if kind is None:
        raise _fail(sec, "kind", "missing (torus_automorphism | two_sided_shift | torus_translation)")
    per_kind = {
        "torus_automorphism": {"matrix"},
        "two_sided_shift": {"weights"},
        "torus_translation": {"vector"},
    }
    if kind not in per_kind:
        raise _fail(sec, "kind", f"unknown system kind {kind!r}")
    allowed = per_kind[kind] | {"kind", "companion", "amplitude", "companion_vector"}
    for key in items:
        if key not in allowed:
            raise _fail(sec, key, f"not valid for system kind {kind!r}")
    if kind == "torus_automorphism":
        if "matrix" not in items:
            raise _fail(sec, "matrix", "missing for torus_automorphism")
        sys = torus_automorphism(_parse_matrix(sec, "matrix", items["matrix"]))
    elif kind == "two_sided_shift":
        if "weights" not in items:
            raise _fail(sec, "weights", "missing for two_sided_shift")
        sys = two_sided_shift(_parse_vector(sec, "weights", items["weights"]))
    else:
        if "vector" not in items:
            raise _fail(sec, "vector", "missing for torus_translation")
        sys = torus_translation(_parse_vector(sec, "vector", items["vector"]))

    comp_kind = items.get("companion", "none")
    if comp_kind == "none":
        if "amplitude" in items or "companion_vector" in items:
            raise _fail(sec, "companion", "companion parameters given without a companion")
        return sys, None
    if comp_kind == "identity":
        return sys, identity_companion()
    if comp_kind == "stable_translation":
        if "amplitude" not in items:
            raise _fail(sec, "amplitude", "missing for the stable_translation companion")
        return sys, stable_translation(sys, _parse_float(sec, "amplitude", items["amplitude"]))
    if comp_kind == "translation":
        if "companion_vector" not in items:
            raise _fail(sec, "companion_vector", "missing for the translation companion")
        return sys, translation_companion(
            _parse_vector(sec, "companion_vector", items["companion_vector"])
        )
    raise _fail(sec, "companion", f"unknown companion kind {comp_kind!r}")


def _build_observable(items: dict[str, str], sys: PhaseSpaceSystem) -> Observable:
    sec = "observable"
    kind = items.get("kind")
    if kind == "coordinate_cosine":
        for key in items:
            if key not in ("kind", "frequency"):
                raise _fail(sec, key, "not valid for coordinate_cosine")
        if "frequency" not in items:
            raise _fail(sec, "frequency", "missing for coordinate_cosine")
        return coordinate_cosine(_parse_int_vector(sec, "frequency", items["frequency"]))
    if kind == "coordinate_symbol":
        for key in items:
            if key not in ("kind", "index"):
                raise _fail(sec, key, "not valid for coordinate_symbol")
        idx = _parse_int(sec, "index", items["index"]) if "index" in items else 0
        return coordinate_symbol(sys, idx)
    if kind == "constant":
        for key in items:
            if key not in ("kind", "value"):
                raise _fail(sec, key, "not valid for constant")
        if "value" not in items:
            raise _fail(sec, "value", "missing for constant")
        return constant_observable(_parse_float(sec, "value", items["value"]))
    raise _fail(sec, "kind", f"unknown observable kind {kind!r}")


def _build_generator(sec: str, items: dict[str, str], sys: PhaseSpaceSystem) -> CocycleGenerator:
    kind = items.get("kind")
    if kind == "constant":
        if "matrix" not in items:
            raise _fail(sec, "matrix", "missing for the constant generator")
        return constant_generator(_parse_matrix(sec, "matrix", items["matrix"]))
    if kind == "symbol_table":
        indexed = {}
        for key in items:
            m = _TABLE_KEY.match(key)
            if m:
                indexed[int(m.group(1))] = _parse_matrix(sec, key, items[key])
        if not indexed:
            raise _fail(sec, "table0", "symbol_table needs table0, table1, ...")
        count = len(indexed)
        if sorted(indexed) != list(range(count)):
            raise _fail(sec, "table*", "table indices must be contiguous from 0")
        if sys.kind == "two_sided_shift" and count != sys.alphabet_size:
            raise _fail(sec, "table*", f"need one table per symbol ({sys.alphabet_size})")
        return symbol_table_generator([indexed[i] for i in range(count)])
    if kind == "smooth_torus":
        if "base" not in items:
            raise _fail(sec, "base", "missing for the smooth_torus generator")
        base = _parse_matrix(sec, "base", items["base"])
        cos_c = _parse_matrix(sec, "cos", items["cos"]) if "cos" in items else None
        sin_c = _parse_matrix(sec, "sin", items["sin"]) if "sin" in items else None
        freq = (
            _parse_int_vector(sec, "frequency", items["frequency"])
            if "frequency" in items
            else (1, 0)
        )
        return smooth_torus_generator(base, cos_c, sin_c, freq)
    raise _fail(sec, "kind", f"unknown cocycle kind {kind!r}")


def _build_cocycle(
    items: dict[str, str], sys: PhaseSpaceSystem
) -> tuple[MatrixCocycle, str, Section | None]:
    sec = "cocycle"
    table_keys = {k for k in items if _TABLE_KEY.match(k)}
    for key in items:
        if key not in _SECTION_KEYS["cocycle"] and key not in table_keys:
            raise _fail(sec, key, "unknown key")
    gen = _build_generator(sec, items, sys)
    period = (
        _parse_int(sec, "renorm_period", items["renorm_period"])
        if "renorm_period" in items
        else 32
    )
    coc = MatrixCocycle(sys, gen, renorm_period=period)
    if "exterior_power" in items:
        coc = exterior_power(coc, _parse_int(sec, "exterior_power", items["exterior_power"]))

    source = items.get("source", "vector")
    if source not in ("vector", "operator_norm", "section"):
        raise _fail(sec, "source", f"unknown source {source!r}")
    section = None
    if source == "section":
        section = _build_section(sec, items, coc.dim)
    elif any(k.startswith("section_") for k in items):
        raise _fail(sec, "section_*", "section parameters given but source is not 'section'")
    return coc, source, section


def _build_section(sec: str, items: dict[str, str], dim: int) -> Section:
    s_kind = items.get("section_kind", "constant")
    if "section_u" not in items:
        raise _fail(sec, "section_u", "missing for the section source")
    u = _parse_vector(sec, "section_u", items["section_u"])
    if len(u) != dim:
        raise _fail(sec, "section_u", f"needs {dim} components")
    if s_kind == "constant":
        return constant_section(u)
    if s_kind == "trig":
        if "section_w" not in items:
            raise _fail(sec, "section_w", "missing for the trig section")
        w = _parse_vector(sec, "section_w", items["section_w"])
        freq = (
            _parse_int_vector(sec, "section_frequency", items["section_frequency"])
            if "section_frequency" in items
            else (1, 0)
        )
        return trig_section(u, w, freq)
    raise _fail(sec, "section_kind", f"unknown section kind {s_kind!r}")


def _build_scheme_spec(items: dict[str, str]) -> SchemeSpec:
    sec = "scheme"
    defaults = SchemeSpec()
    averaging = items.get("averaging", defaults.averaging)
    if averaging not in ("mean", "zero"):
        raise _fail(sec, "averaging", f"expected mean or zero, got {averaging!r}")
    normalizing = items.get("normalizing", defaults.normalizing)
    if normalizing not in ("linear", "sqrt"):
        raise _fail(sec, "normalizing", f"expected linear or sqrt, got {normalizing!r}")
    law = items.get("law", defaults.law)
    if law not in ("gaussian", "dirac"):
        raise _fail(sec, "law", f"expected gaussian or dirac, got {law!r}")

    mean: float | str
    raw_mean = items.get("mean")
    if raw_mean is None:
        mean = defaults.mean
    elif raw_mean.strip() == "spectrum":
        mean = "spectrum"
    else:
        mean = _parse_float(sec, "mean", raw_mean)
    if averaging == "zero" and raw_mean is not None:
        raise _fail(sec, "mean", "averaging 'zero' takes no mean")

    variance: float | str
    raw_var = items.get("variance")
    if raw_var is not None and law != "gaussian":
        raise _fail(sec, "variance", "variance only applies to the gaussian law")
    if raw_var is None:
        variance = defaults.variance
    elif raw_var.strip() == "green_kubo":
        variance = "green_kubo"
    else:
        variance = _parse_float(sec, "variance", raw_var)
        if variance <= 0:
            raise _fail(sec, "variance", "must be positive")

    return SchemeSpec(
        averaging=averaging,
        mean=mean,
        normalizing=normalizing,
        law=law,
        variance=variance,
        spectrum_orbits=(
            _parse_int(sec, "spectrum_orbits", items["spectrum_orbits"])
            if "spectrum_orbits" in items
            else defaults.spectrum_orbits
        ),
        spectrum_steps=(
            _parse_int(sec, "spectrum_steps", items["spectrum_steps"])
            if "spectrum_steps" in items
            else defaults.spectrum_steps
        ),
        gk_lag_max=(
            _parse_int(sec, "gk_lag_max", items["gk_lag_max"])
            if "gk_lag_max" in items
            else defaults.gk_lag_max
        ),
        gk_samples=(
            _parse_int(sec, "gk_samples", items["gk_samples"])
            if "gk_samples" in items
            else defaults.gk_samples
        ),
    )


def _build_event(
    name: str, items: dict[str, str], sys: PhaseSpaceSystem, dim_hint: int | None
) -> Event:
    kind = items.get("kind")
    if kind == "full_space":
        for key in items:
            if key != "kind":
                raise _fail(name, key, "not valid for full_space")
        return full_space()
    if kind == "torus_box":
        for key in items:
            if key not in ("kind", "lower", "upper"):
                raise _fail(name, key, "not valid for torus_box")
        if "lower" not in items or "upper" not in items:
            raise _fail(name, "lower/upper", "torus_box needs both bounds")
        if sys.kind == "two_sided_shift":
            raise _fail(name, "kind", "torus_box needs a torus system")
        return torus_box(
            _parse_vector(name, "lower", items["lower"]),
            _parse_vector(name, "upper", items["upper"]),
        )
    if kind == "shift_cylinder":
        for key in items:
            if key not in ("kind", "first_index", "symbols"):
                raise _fail(name, key, "not valid for shift_cylinder")
        if "symbols" not in items:
            raise _fail(name, "symbols", "shift_cylinder needs pinned symbols")
        first = (
            _parse_int(name, "first_index", items["first_index"])
            if "first_index" in items
            else 0
        )
        return shift_cylinder(sys, first, _parse_int_vector(name, "symbols", items["symbols"]))
    if kind == "projective_cap":
        for key in items:
            if key not in ("kind", "center", "angle"):
                raise _fail(name, key, "not valid for projective_cap")
        if "center" not in items or "angle" not in items:
            raise _fail(name, "center/angle", "projective_cap needs both")
        center = _parse_vector(name, "center", items["center"])
        if dim_hint is not None and len(center) != dim_hint:
            raise _fail(name, "center", f"needs {dim_hint} components")
        return projective_cap(center, _parse_float(name, "angle", items["angle"]))
    raise _fail(name, "kind", f"unknown event kind {kind!r}")


# ---------------------------------------------------------------------------
# top-level parse


def _read_parser(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        interpolation=None,
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        strict=True,
        empty_lines_in_values=False,
    )
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from None
    return parser


def parse_config_text(text: str, seed_override: int | None = None) -> ExperimentConfig:
    parser = _read_parser(text)
    sections = {s: dict(parser.items(s)) for s in parser.sections()}

    if "experiment" not in sections:
        raise ConfigurationError("missing [experiment] section")
    exp = sections["experiment"]
    for key in exp:
        if key not in _SECTION_KEYS["experiment"]:
            raise ConfigurationError(f"[experiment] {key}: unknown key")
    kind = exp.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(
            f"[experiment] kind: expected one of {', '.join(EXPERIMENT_KINDS)}, got {kind!r}"
        )
    required, optional = _KIND_SECTIONS[kind]
    for s in sections:
        if s not in required and s not in optional:
            raise ConfigurationError(f"section [{s}] is not valid for kind {kind!r}")
    for s in sorted(required):
        if s not in sections:
            raise ConfigurationError(f"kind {kind!r} needs a [{s}] section")
    for s, items in sections.items():
        if s in ("experiment", "system", "cocycle_system", "observable", "event_a", "event_b", "cocycle"):
            continue  # validated by their builders (variable key sets)
        for key in items:
            if key not in _SECTION_KEYS[s]:
                raise ConfigurationError(f"[{s}] {key}: unknown key")

    seed: int | None
    if seed_override is not None:
        seed = int(seed_override)
    elif "seed" in exp:
        seed = _parse_int("experiment", "seed", exp["seed"])
    else:
        seed = None
    if seed is not None and not (0 <= seed < 2**64):
        raise ConfigurationError("[experiment] seed: must fit in 64 bits")
    name = exp.get("name", kind)
    if not re.fullmatch(r"[A-Za-z0-9._-]+", name):
        raise ConfigurationError("[experiment] name: use letters, digits, dot, dash, underscore")

    cfg = ExperimentConfig(kind=kind, name=name, seed=seed)

    if "system" in sections:
        cfg.sys, cfg.companion = _build_system("system", sections["system"])
    if "cocycle_system" in sections:
        cfg.cocycle_sys, cfg.cocycle_companion = _build_system(
            "cocycle_system", sections["cocycle_system"]
        )
    else:
        cfg.cocycle_sys, cfg.cocycle_companion = cfg.sys, cfg.companion

    if "observable" in sections and "cocycle" in sections and kind != "hypothesis_check":
        raise ConfigurationError(f"kind {kind!r} takes [observable] or [cocycle], not both")
    if kind in ("plain_dlt", "conditional_dlt", "mixing_dlt", "char_fn"):
        if "observable" not in sections and "cocycle" not in sections:
            raise ConfigurationError(f"kind {kind!r} needs an [observable] or [cocycle] section")

    if "observable" in sections:
        if cfg.sys is None:
            raise ConfigurationError("[observable] needs a [system] section")
        cfg.observable = _build_observable(sections["observable"], cfg.sys)
    if "cocycle" in sections:
        base = cfg.cocycle_sys
        if base is None:
            raise ConfigurationError("[cocycle] needs a [system] section")
        cfg.cocycle, cfg.source_kind, cfg.section = _build_cocycle(sections["cocycle"], base)
    elif cfg.observable is not None:
        cfg.source_kind = "observable"

    if "scheme" in sections:
        cfg.scheme_spec = _build_scheme_spec(sections["scheme"])
        if cfg.scheme_spec.mean == "spectrum" and cfg.cocycle is None:
            raise ConfigurationError("[scheme] mean: 'spectrum' needs a [cocycle] section")
        if cfg.scheme_spec.variance == "green_kubo" and cfg.observable is None:
            raise ConfigurationError("[scheme] variance: 'green_kubo' needs an [observable] section")

    if "run" in sections:
        run = sections["run"]
        if "n_samples" not in run:
            raise ConfigurationError("[run] n_samples: missing")
        cfg.n_samples = _parse_int("run", "n_samples", run["n_samples"])
        multi_n = kind in ("plain_dlt", "mixing_correlation")
        if multi_n:
            if "n_steps" in run:
                raise ConfigurationError(f"[run] n_steps: kind {kind!r} uses n_list")
            if "n_list" not in run:
                raise ConfigurationError("[run] n_list: missing")
            cfg.n_list = tuple(_parse_int_vector("run", "n_list", run["n_list"]))
        else:
            if "n_list" in run:
                raise ConfigurationError(f"[run] n_list: kind {kind!r} uses n_steps")
            if "n_steps" not in run:
                raise ConfigurationError("[run] n_steps: missing")
            cfg.n_list = (_parse_int("run", "n_steps", run["n_steps"]),)
        if any(n < 1 for n in cfg.n_list):
            raise ConfigurationError("[run] orbit lengths must be positive")
        if "tolerance" in run:
            cfg.tolerance = _parse_float("run", "tolerance", run["tolerance"])
            if cfg.tolerance <= 0:
                raise ConfigurationError("[run] tolerance: must be positive")

    dim_hint = cfg.cocycle.dim if cfg.cocycle is not None else None
    if "event_a" in sections:
        cfg.event_a = _build_event("event_a", sections["event_a"], cfg.sys, dim_hint)
    if "event_b" in sections:
        cfg.event_b = _build_event("event_b", sections["event_b"], cfg.sys, dim_hint)
    for ev, where in ((cfg.event_a, "event_a"), (cfg.event_b, "event_b")):
        if (
            ev is not None
            and ev.kind == "projective_cap"
            and cfg.source_kind not in ("vector", "section")
        ):
            raise ConfigurationError(
                f"[{where}] projective_cap needs a cocycle source that carries directions"
            )

    if "interval" in sections:
        iv_items = sections["interval"]
        if "a" not in iv_items or "b" not in iv_items:
            raise ConfigurationError("[interval] needs both a and b")
        cfg.iv = interval(
            _parse_float("interval", "a", iv_items["a"]),
            _parse_float("interval", "b", iv_items["b"]),
        )

    if kind == "char_fn":
        ch = sections["char_fn"]
        if "t" not in ch:
            raise ConfigurationError("[char_fn] t: missing")
        cfg.char_t = _parse_float("char_fn", "t", ch["t"])
        cfg.char_weight = ch.get("weight", "none")
        if cfg.char_weight not in ("none", "event_a", "observable"):
            raise ConfigurationError(
                f"[char_fn] weight: expected none, event_a, or observable, got {cfg.char_weight!r}"
            )
        if cfg.char_weight == "event_a" and cfg.event_a is None:
            raise ConfigurationError("[char_fn] weight: event_a requested but no [event_a] section")
        if cfg.char_weight == "observable" and cfg.observable is None:
            raise ConfigurationError("[char_fn] weight: observable requested but none configured")

    if kind == "spectrum":
        sp = sections["spectrum"]
        if "n_orbits" not in sp or "n_steps" not in sp:
            raise ConfigurationError("[spectrum] needs n_orbits and n_steps")
        cfg.spectrum = SpectrumSpec(
            n_orbits=_parse_int("spectrum", "n_orbits", sp["n_orbits"]),
            n_steps=_parse_int("spectrum", "n_steps", sp["n_steps"]),
            qr_period=(
                _parse_int("spectrum", "qr_period", sp["qr_period"])
                if "qr_period" in sp
                else None
            ),
            expected=(
                _parse_vector("spectrum", "expected", sp["expected"])
                if "expected" in sp
                else None
            ),
            expected_tolerance=(
                _parse_float("spectrum", "expected_tolerance", sp["expected_tolerance"])
                if "expected_tolerance" in sp
                else 1e-6
            ),
            check_sum_zero=(
                _parse_bool("spectrum", "check_sum_zero", sp["check_sum_zero"])
                if "check_sum_zero" in sp
                else False
            ),
        )
        if cfg.spectrum.expected is not None and len(cfg.spectrum.expected) != cfg.cocycle.dim:
            raise ConfigurationError("[spectrum] expected: needs one value per exponent")

    if kind == "zorich_spectrum":
        z = sections["zorich"]
        for need in ("permutation", "n_orbits", "n_steps"):
            if need not in z:
                raise ConfigurationError(f"[zorich] {need}: missing")
        cfg.zorich = ZorichSpec(
            permutation=tuple(_parse_int_vector("zorich", "permutation", z["permutation"])),
            n_orbits=_parse_int("zorich", "n_orbits", z["n_orbits"]),
            n_steps=_parse_int("zorich", "n_steps", z["n_steps"]),
            check_symmetry=(
                _parse_bool("zorich", "check_symmetry", z["check_symmetry"])
                if "check_symmetry" in z
                else True
            ),
            gap_ses=(
                _parse_float("zorich", "gap_ses", z["gap_ses"]) if "gap_ses" in z else 5.0
            ),
        )

    if kind == "hypothesis_check":
        h = sections.get("hypothesis_check", {})
        defaults = HypothesisSpec()
        cfg.hyp = HypothesisSpec(
            contraction_steps=(
                _parse_int("hypothesis_check", "contraction_steps", h["contraction_steps"])
                if "contraction_steps" in h
                else defaults.contraction_steps
            ),
            profile_steps=(
                _parse_int("hypothesis_check", "profile_steps", h["profile_steps"])
                if "profile_steps" in h
                else defaults.profile_steps
            ),
            n_directions=(
                _parse_int("hypothesis_check", "n_directions", h["n_directions"])
                if "n_directions" in h
                else defaults.n_directions
            ),
            boundedness_samples=(
                _parse_int("hypothesis_check", "boundedness_samples", h["boundedness_samples"])
                if "boundedness_samples" in h
                else defaults.boundedness_samples
            ),
            identities=(
                _parse_bool("hypothesis_check", "identities", h["identities"])
                if "identities" in h
                else defaults.identities
            ),
            identity_cases=(
                _parse_int("hypothesis_check", "identity_cases", h["identity_cases"])
                if "identity_cases" in h
                else defaults.identity_cases
            ),
            identity_span=(
                _parse_int("hypothesis_check", "identity_span", h["identity_span"])
                if "identity_span" in h
                else defaults.identity_span
            ),
        )

    cfg.resolved = _resolve_echo(sections, cfg)
    return cfg


def parse_config(path: str, seed_override: int | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, seed_override)


def _resolve_echo(
    sections: dict[str, dict[str, str]], cfg: ExperimentConfig
) -> dict[str, dict[str, str]]:
    """The config as run: file contents plus every applied default.

    Key order is canonical (file order per section, defaults appended in a
    fixed order), so the echo is byte-stable for a given (config, seed).
    """
    echo: dict[str, dict[str, str]] = {}
    for s, items in sections.items():
        echo[s] = dict(items)
    exp = echo.setdefault("experiment", {})
    exp["kind"] = cfg.kind
    exp["name"] = cfg.name
    exp["seed"] = "unset" if cfg.seed is None else str(cfg.seed)
    if cfg.scheme_spec is not None:
        sch = echo.setdefault("scheme", {})
        spec = cfg.scheme_spec
        sch.setdefault("averaging", spec.averaging)
        if spec.averaging == "mean":
            sch["mean"] = str(spec.mean)
        sch.setdefault("normalizing", spec.normalizing)
        sch.setdefault("law", spec.law)
        if spec.law == "gaussian":
            sch["variance"] = str(spec.variance)
        if spec.mean == "spectrum":
            sch.setdefault("spectrum_orbits", str(spec.spectrum_orbits))
            sch.setdefault("spectrum_steps", str(spec.spectrum_steps))
        if spec.variance == "green_kubo":
            sch.setdefault("gk_lag_max", str(spec.gk_lag_max))
            sch.setdefault("gk_samples", str(spec.gk_samples))
    if "cocycle" in echo and cfg.cocycle is not None:
        echo["cocycle"].setdefault("renorm_period", str(cfg.cocycle.renorm_period))
        echo["cocycle"].setdefault("source", cfg.source_kind or "vector")
    if cfg.n_list and "run" in echo:
        echo["run"].setdefault(
            "tolerance", "auto" if cfg.tolerance is None else str(cfg.tolerance)
        )
    if cfg.hyp is not None:
        h = echo.setdefault("hypothesis_check", {})
        spec = cfg.hyp
        h.setdefault("contraction_steps", str(spec.contraction_steps))
        h.setdefault("profile_steps", str(spec.profile_steps))
        h.setdefault("n_directions", str(spec.n_directions))
        h.setdefault("boundedness_samples", str(spec.boundedness_samples))
        h.setdefault("identities", "true" if spec.identities else "false")
        h.setdefault("identity_cases", str(spec.identity_cases))
        h.setdefault("identity_span", str(spec.identity_span))
    if cfg.spectrum is not None:
        sp = echo.setdefault("spectrum", {})
        sp.setdefault("qr_period", "auto" if cfg.spectrum.qr_period is None else str(cfg.spectrum.qr_period))
        sp.setdefault("expected_tolerance", str(cfg.spectrum.expected_tolerance))
        sp.setdefault("check_sum_zero", "true" if cfg.spectrum.check_sum_zero else "false")
    if cfg.zorich is not None:
        z = echo.setdefault("zorich", {})
        z.setdefault("check_symmetry", "true" if cfg.zorich.check_symmetry else "false")
        z.setdefault("gap_ses", str(cfg.zorich.gap_ses))
    return echo
