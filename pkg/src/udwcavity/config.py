"""Scenario configuration files.

Configs are flat INI files read with :mod:`configparser`.  Every key is typed
by the schema below; unknown sections or keys are rejected and missing
required keys are reported by name.  Numeric values may be simple arithmetic
expressions in ``pi`` (``4*pi``, ``8/7``); lists are comma separated and may
also be written ``linspace(start, stop, count)`` or ``geomspace(start, stop, count)``.  ``serialize`` writes every
value in canonical form so that ``parse(serialize(cfg)) == cfg``.
"""

from __future__ import annotations

import ast
import configparser
import hashlib
import math
import operator
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .cavity import Boundary, ConfigurationError
from .evolver import IntegratorConfig

SCENARIOS = ("switching_noise", "causality", "unruh", "harvesting")

PACKAGE_CONFIG_DIR = Path(__file__).with_name("configs")


class ConfigError(ConfigurationError):
    """Schema or value error in a configuration file."""


# ---------------------------------------------------------------------------
# value parsing

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand))
    raise ValueError("unsupported expression")


def parse_number(text: str) -> float:
    try:
        value = _eval_node(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot read {text!r} as a number") from exc
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def parse_int(text: str) -> int:
    value = parse_number(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"cannot read {text!r} as a boolean")


def _split_list(text: str):
    text = text.strip()
    for name, fn in (("linspace", np.linspace), ("geomspace", np.geomspace)):
        if text.startswith(name + "(") and text.endswith(")"):
            parts = text[len(name) + 1:-1].split(",")
            if len(parts) != 3:
                raise ValueError(f"{name} needs start, stop, count")
            start, stop, count = parse_number(parts[0]), parse_number(parts[1]), parse_int(parts[2])
            if count < 1 or (name == "geomspace" and not (start > 0 and stop > 0)):
                raise ValueError(f"invalid {name} arguments")
            return [float(v) for v in fn(start, stop, count)], True
    return [p for p in text.split(",") if p.strip()], False


def parse_float_list(text: str) -> tuple:
    items, done = _split_list(text)
    return tuple(items) if done else tuple(parse_number(p) for p in items)


def parse_int_list(text: str) -> tuple:
    items, done = _split_list(text)
    if done:
        raise ValueError("integer lists must be written out")
    return tuple(parse_int(p) for p in items)


def fmt_float(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# typed config objects


@dataclass(frozen=True)
class DetectorSpec:
    gap: float
    coupling: float
    switching: str = "sharp"
    width: Optional[float] = None
    trajectory: str = "inertial"
    position: float = 0.0
    acceleration: Optional[float] = None
    squeezing: float = 0.0


@dataclass(frozen=True)
class ConvergenceSpec:
    schedule: tuple
    tolerance: float


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    length: float
    boundary: str
    modes: int
    detectors: tuple
    include_zero_mode: bool = False
    normalize_modes: bool = False
    picture: str = "interaction"
    seed: int = 0
    sweep: tuple = ()  # sorted (key, value) pairs, see SWEEP_KEYS
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    convergence: Optional[ConvergenceSpec] = None

    def sweep_value(self, key, default=None):
        return dict(self.sweep).get(key, default)

    def with_sweep(self, **updates) -> "ScenarioConfig":
        d = dict(self.sweep)
        d.update(updates)
        return replace(self, sweep=tuple(sorted(d.items())))


# Sweep keys allowed per scenario: key -> (parser, formatter)
_FLIST = (parse_float_list, lambda v: ", ".join(fmt_float(x) for x in v))
_ILIST = (parse_int_list, lambda v: ", ".join(str(int(x)) for x in v))
_FLOAT = (parse_number, fmt_float)
_INT = (parse_int, lambda v: str(int(v)))

SWEEP_KEYS = {
    "switching_noise": {
        "widths": _FLIST,
        "window_widths": _FLOAT,
        "mode_scaling_width": _FLOAT,
        "sharp_time_max": _FLOAT,
        "sharp_samples": _INT,
        "sharp_modes": _INT,
        "sharp_schedule": _ILIST,
        "sharp_tolerance": _FLOAT,
    },
    "causality": {
        "mode_counts": _ILIST,
        "tau_max_over_tauc": _FLOAT,
        "samples": _INT,
        "onset_fraction": _FLOAT,
    },
    "unruh": {
        "accelerations": _FLIST,
        "window_widths": _FLOAT,
    },
    "harvesting": {
        "tau_max_over_tauc": _FLOAT,
        "samples": _INT,
        "onset_threshold": _FLOAT,
    },
}

_DETECTOR_KEYS = {
    "gap": (parse_number, fmt_float, True),
    "coupling": (parse_number, fmt_float, True),
    "switching": (str.strip, str, False),
    "width": (parse_number, fmt_float, False),
    "trajectory": (str.strip, str, False),
    "position": (parse_number, fmt_float, False),
    "acceleration": (parse_number, fmt_float, False),
    "squeezing": (parse_number, fmt_float, False),
}

_INTEGRATOR_KEYS = {
    "method": (str.strip, str),
    "scheme": (str.strip, str),
    "rtol": (parse_number, fmt_float),
    "atol": (parse_number, fmt_float),
    "dt": (parse_number, fmt_float),
    "max_step": (parse_number, fmt_float),
    "resymplectify_every": (parse_int, lambda v: str(int(v))),
    "drift_ceiling": (parse_number, fmt_float),
}


def _field_error(where: str, key: str, exc: Exception) -> ConfigError:
    return ConfigError(f"[{where}] {key}: {exc}")


def _take(section, key, parser, where, required=False, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"[{where}] missing required key {key!r}")
        return default
    try:
        return parser(section[key])
    except (ValueError, TypeError) as exc:
        raise _field_error(where, key, exc) from None


def _check_keys(section, allowed, where):
    unknown = sorted(set(section.keys()) - set(allowed))
    if unknown:
        raise ConfigError(f"[{where}] unknown key(s): {', '.join(unknown)}")


def _validate_detector(d: DetectorSpec, where: str, boundary: str, length: float) -> None:
    if d.gap <= 0:
        raise ConfigError(f"[{where}] gap must be > 0")
    if d.coupling < 0:
        raise ConfigError(f"[{where}] coupling must be >= 0")
    if d.switching not in ("sharp", "gaussian"):
        raise ConfigError(f"[{where}] switching must be 'sharp' or 'gaussian'")
    if d.switching == "gaussian" and (d.width is None or d.width <= 0):
        raise ConfigError(f"[{where}] gaussian switching needs width > 0")
    if d.switching == "sharp" and d.width is not None:
        raise ConfigError(f"[{where}] width only applies to gaussian switching")
    if d.trajectory not in ("inertial", "accelerated"):
        raise ConfigError(f"[{where}] trajectory must be 'inertial' or 'accelerated'")
    if d.trajectory == "inertial" and d.acceleration is not None:
        raise ConfigError(f"[{where}] acceleration only applies to accelerated trajectories")
    if d.acceleration is not None and d.acceleration <= 0:
        raise ConfigError(f"[{where}] acceleration must be > 0")
    if d.squeezing < 0:
        raise ConfigError(f"[{where}] squeezing must be >= 0")
    if boundary == "dirichlet" and not (0 <= d.position <= length):
        raise ConfigError(f"[{where}] position must lie inside the cavity [0, L]")


def parse_config_text(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__", inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections = cp.sections()
    if not sections:
        raise ConfigError("empty config: required sections [run], [cavity] and [detector.1] with keys "
                          "scenario, length, boundary, modes, gap, coupling")
    allowed = {"run", "cavity", "sweep", "integrator", "convergence"}
    for s in sections:
        if s not in allowed and not s.startswith("detector."):
            raise ConfigError(f"unknown section [{s}]")
    for s in ("run", "cavity"):
        if s not in cp:
            raise ConfigError(f"missing required section [{s}]")

    run = cp["run"]
    _check_keys(run, ("scenario", "picture", "seed"), "run")
    scenario = _take(run, "scenario", str.strip, "run", required=True)
    if scenario not in SCENARIOS:
        raise ConfigError(f"[run] scenario must be one of {', '.join(SCENARIOS)}")
    picture = _take(run, "picture", str.strip, "run", default="interaction")
    if picture not in ("interaction", "full"):
        raise ConfigError("[run] picture must be 'interaction' or 'full'")
    seed = _take(run, "seed", parse_int, "run", default=0)

    cav = cp["cavity"]
    _check_keys(cav, ("length", "boundary", "modes", "include_zero_mode", "normalize_modes"), "cavity")
    length = _take(cav, "length", parse_number, "cavity", required=True)
    boundary = _take(cav, "boundary", str.strip, "cavity", required=True)
    modes = _take(cav, "modes", parse_int, "cavity", required=True)
    zero = _take(cav, "include_zero_mode", parse_bool, "cavity", default=False)
    norm = _take(cav, "normalize_modes", parse_bool, "cavity", default=False)
    if length <= 0:
        raise ConfigError("[cavity] length must be > 0")
    if boundary not in (b.value for b in Boundary):
        raise ConfigError("[cavity] boundary must be 'dirichlet' or 'periodic'")
    if modes < 1:
        raise ConfigError("[cavity] modes must be >= 1 (Dirichlet indices start at n = 1)")
    if zero and boundary == "dirichlet":
        raise ConfigError("[cavity] include_zero_mode only applies to periodic boundaries")

    det_sections = sorted((s for s in sections if s.startswith("detector.")), key=lambda s: s.split(".", 1)[1])
    if not det_sections:
        raise ConfigError("missing required section [detector.1]")
    names = [s.split(".", 1)[1] for s in det_sections]
    if names != [str(i) for i in range(1, len(names) + 1)]:
        raise ConfigError("detector sections must be numbered detector.1, detector.2, ...")
    detectors = []
    for s in det_sections:
        sec = cp[s]
        _check_keys(sec, _DETECTOR_KEYS, s)
        kw = {}
        for key, (parser, _, req) in _DETECTOR_KEYS.items():
            v = _take(sec, key, parser, s, required=req)
            if v is not None:
                kw[key] = v
        d = DetectorSpec(**kw)
        _validate_detector(d, s, boundary, length)
        detectors.append(d)

    sweep = []
    if "sweep" in cp:
        spec = SWEEP_KEYS[scenario]
        _check_keys(cp["sweep"], spec, "sweep")
        for key, (parser, _) in spec.items():
            v = _take(cp["sweep"], key, parser, "sweep")
            if v is not None:
                sweep.append((key, v))

    icfg = IntegratorConfig()
    if "integrator" in cp:
        sec = cp["integrator"]
        _check_keys(sec, _INTEGRATOR_KEYS, "integrator")
        kw = {}
        for key, (parser, _) in _INTEGRATOR_KEYS.items():
            v = _take(sec, key, parser, "integrator")
            if v is not None:
                kw[key] = v
        try:
            icfg = IntegratorConfig(**kw)
        except ValueError as exc:
            raise ConfigError(f"[integrator] {exc}") from None

    conv = None
    if "convergence" in cp:
        sec = cp["convergence"]
        _check_keys(sec, ("schedule", "tolerance"), "convergence")
        schedule = _take(sec, "schedule", parse_int_list, "convergence", required=True)
        tol = _take(sec, "tolerance", parse_number, "convergence", required=True)
        conv = ConvergenceSpec(schedule, tol)
        validate_convergence(conv)

    return ScenarioConfig(
        scenario=scenario, length=length, boundary=boundary, modes=modes, detectors=tuple(detectors),
        include_zero_mode=zero, normalize_modes=norm, picture=picture, seed=seed,
        sweep=tuple(sorted(sweep)), integrator=icfg, convergence=conv,
    )


def validate_convergence(conv: ConvergenceSpec) -> None:
    s = conv.schedule
    if len(s) < 1 or any(n < 1 for n in s):
        raise ConfigError("[convergence] schedule needs positive mode counts")
    if any(b <= a for a, b in zip(s[:-1], s[1:])):
        raise ConfigError("[convergence] schedule must be strictly increasing")
    if not conv.tolerance > 0:
        raise ConfigError("[convergence] tolerance must be > 0")


def parse_config(path) -> ScenarioConfig:
    """Read and validate a config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def load_default(scenario: str) -> ScenarioConfig:
    """The checked-in config for ``scenario``."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    return parse_config(PACKAGE_CONFIG_DIR / f"{scenario}.cfg")


def serialize(cfg: ScenarioConfig) -> str:
    """Canonical text form of ``cfg``."""
    out = ["[run]", f"scenario = {cfg.scenario}", f"picture = {cfg.picture}", f"seed = {cfg.seed}", ""]
    out += [
        "[cavity]",
        f"length = {fmt_float(cfg.length)}",
        f"boundary = {cfg.boundary}",
        f"modes = {cfg.modes}",
        f"include_zero_mode = {str(cfg.include_zero_mode).lower()}",
        f"normalize_modes = {str(cfg.normalize_modes).lower()}",
        "",
    ]
    for i, d in enumerate(cfg.detectors, start=1):
        out.append(f"[detector.{i}]")
        for key, (_, fmt, _) in _DETECTOR_KEYS.items():
            v = getattr(d, key)
            if v is not None:
                out.append(f"{key} = {fmt(v)}")
        out.append("")
    if cfg.sweep:
        out.append("[sweep]")
        spec = SWEEP_KEYS[cfg.scenario]
        for key, v in cfg.sweep:
            out.append(f"{key} = {spec[key][1](v)}")
        out.append("")
    out.append("[integrator]")
    for f in fields(IntegratorConfig):
        v = getattr(cfg.integrator, f.name)
        if v is not None:
            out.append(f"{f.name} = {_INTEGRATOR_KEYS[f.name][1](v)}")
    out.append("")
    if cfg.convergence is not None:
        out += [
            "[convergence]",
            f"schedule = {', '.join(str(n) for n in cfg.convergence.schedule)}",
            f"tolerance = {fmt_float(cfg.convergence.tolerance)}",
            "",
        ]
    return "\n".join(out)


def config_hash(cfg: ScenarioConfig) -> str:
    """SHA-256 of the canonical serialisation."""
    return hashlib.sha256(serialize(cfg).encode()).hexdigest()
