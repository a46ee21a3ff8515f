"""Command-line driver.

    udwcavity --scenario unruh --out results/
    udwcavity --config my.cfg --modes 40,80 --tolerance 1e-3 --out results/
    udwcavity --scenario causality --validate-only

Exit codes:
    0  success
    1  unexpected internal error
    2  usage or configuration error
    3  symplectic drift above the configured ceiling
    4  mode-count convergence not reached
    5  thermality check failed at one or more Unruh points
    6  unphysical state encountered
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .cavity import ConfigurationError
from .config import (
    SCENARIOS,
    ConfigError,
    ConvergenceSpec,
    ScenarioConfig,
    config_hash,
    load_default,
    parse_config,
    serialize,
    validate_convergence,
)
from .evolver import STEPS_PER_PERIOD_FRACTION, SymplecticDriftError
from .gaussian import UnphysicalStateError
from .scenarios import FLAG_NONCONVERGENCE, FLAG_THERMALITY, RUNNERS, ScenarioResult, build_system

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DRIFT = 3
EXIT_NONCONVERGENCE = 4
EXIT_THERMALITY = 5
EXIT_UNPHYSICAL = 6


@dataclass(frozen=True)
class RunManifest:
    scenario: Optional[str]
    config_path: Optional[str]
    out_dir: Optional[str]
    modes: Optional[tuple] = None
    tolerance: Optional[float] = None
    seed: Optional[int] = None
    validate_only: bool = False


def resolve_config(m: RunManifest) -> ScenarioConfig:
    """Load the config named by the manifest and apply its overrides."""
    if m.config_path:
        cfg = parse_config(m.config_path)
        if m.scenario and m.scenario != cfg.scenario:
            raise ConfigError(f"--scenario {m.scenario} does not match config scenario {cfg.scenario}")
    elif m.scenario:
        cfg = load_default(m.scenario)
    else:
        raise ConfigError("either --scenario or --config is required")
    if m.seed is not None:
        cfg = replace(cfg, seed=m.seed)
    if m.modes is not None:
        modes = tuple(m.modes)
        if not modes or any(n < 1 for n in modes):
            raise ConfigError("--modes needs positive integers")
        if cfg.scenario == "causality":
            cfg = cfg.with_sweep(mode_counts=modes)
        else:
            tol = m.tolerance if m.tolerance is not None else (cfg.convergence.tolerance if cfg.convergence else 1.0)
            cfg = replace(cfg, modes=modes[0], convergence=ConvergenceSpec(modes, tol) if len(modes) > 1 else None)
    if m.tolerance is not None:
        if cfg.convergence is None:
            if cfg.scenario != "causality" and (m.modes is None or len(m.modes) > 1):
                raise ConfigError("--tolerance needs a convergence schedule")
        else:
            cfg = replace(cfg, convergence=ConvergenceSpec(cfg.convergence.schedule, m.tolerance))
    if cfg.convergence is not None:
        validate_convergence(cfg.convergence)
    return cfg


def _mode_counts(cfg: ScenarioConfig) -> tuple:
    if cfg.scenario == "causality":
        return tuple(cfg.sweep_value("mode_counts", (cfg.modes,)))
    if cfg.convergence is not None:
        return tuple(cfg.convergence.schedule)
    return (cfg.modes,)


def validate(m: RunManifest) -> dict:
    """Dry run: resolve the config and report mode sets and step ceilings."""
    cfg = resolve_config(m)
    report = {"scenario": cfg.scenario, "config_hash": config_hash(cfg), "mode_counts": [], "warnings": []}
    for n in _mode_counts(cfg):
        acc = cfg.sweep_value("accelerations")
        system = build_system(cfg, n, acceleration=max(acc) if acc else None)
        fs = system.fsym(0.0)
        radius = float(np.max(np.abs(np.linalg.eigvals(system.omega() @ fs))))
        om_max = system.max_frequency()
        report["mode_counts"].append({
            "N": n,
            "mode_indices": [system.cavity.mode_indices[0], system.cavity.mode_indices[-1]],
            "omega_max": om_max,
            "generator_spectral_radius": radius,
            "generator_norm": float(np.linalg.norm(fs, 2)),
            "dt_max": cfg.integrator.step_ceiling(system),
        })
        freqs = system.cavity.frequencies()
        for d in cfg.detectors:
            if not np.any(np.abs(freqs - d.gap) < 1e-9 * d.gap):
                msg = f"N={n}: detector gap {d.gap} is not resonant with any included mode"
                report["warnings"].append(msg)
    report["step_fraction"] = STEPS_PER_PERIOD_FRACTION
    return report


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def write_csv(path: Path, res: ScenarioResult, digest: str) -> None:
    names = list(res.columns)
    cols = [np.asarray(res.columns[k], dtype=float) for k in names]
    lines = [f"# config_sha256={digest}", ",".join(names)]
    for i in range(len(cols[0])):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    path.write_text("\n".join(lines) + "\n")


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def exit_code_for(results) -> int:
    flags = {f for r in results for f in r.flags}
    if FLAG_NONCONVERGENCE in flags:
        return EXIT_NONCONVERGENCE
    if FLAG_THERMALITY in flags:
        return EXIT_THERMALITY
    return EXIT_OK


def run(m: RunManifest) -> int:
    """Execute the manifest, write outputs and return an exit code."""
    cfg = resolve_config(m)
    if m.validate_only:
        print(json.dumps(_clean(validate(m)), indent=2))
        return EXIT_OK
    if not m.out_dir:
        raise ConfigError("--out is required unless --validate-only is given")
    out = Path(m.out_dir)
    probe = out / ".write_test"
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None

    digest = config_hash(cfg)
    results = RUNNERS[cfg.scenario](cfg)
    files = []
    for r in results:
        name = f"{cfg.scenario}_{r.label}.csv"
        write_csv(out / name, r, digest)
        files.append(name)
    code = exit_code_for(results)
    sidecar = {
        "scenario": cfg.scenario,
        "config_sha256": digest,
        "config": serialize(cfg),
        "seed": cfg.seed,
        "exit_code": code,
        "tables": [
            {"file": f, "label": r.label, "columns": list(r.columns), "flags": r.flags, "metadata": r.metadata}
            for f, r in zip(files, results)
        ],
    }
    (out / f"{cfg.scenario}.json").write_text(json.dumps(_clean(sidecar), indent=2) + "\n")
    for f, r in zip(files, results):
        status = ",".join(r.flags) if r.flags else "ok"
        print(f"{f}: {len(r.axis)} rows, N={r.metadata.get('n_modes')}, {status}")
    return code


def check_hash(csv_path, expected: str) -> None:
    """Raise if the CSV at ``csv_path`` was produced from a different config."""
    first = Path(csv_path).read_text().splitlines()[0]
    if not first.startswith("# config_sha256="):
        raise ValueError(f"{csv_path} carries no config hash")
    found = first.split("=", 1)[1].strip()
    if found != expected:
        raise ValueError(f"config hash mismatch: {found} != {expected}")


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="udwcavity", description="Detector-cavity Gaussian simulations.")
    p.add_argument("--scenario", choices=SCENARIOS, help="run the checked-in config for this scenario")
    p.add_argument("--config", help="path to a config file (overrides the checked-in one)")
    p.add_argument("--out", help="output directory for CSV and JSON files")
    p.add_argument("--modes", type=_int_list, help="mode-count schedule, e.g. 40,80,160")
    p.add_argument("--tolerance", type=float, help="convergence tolerance override")
    p.add_argument("--seed", type=int, help="seed recorded in the config (scenarios are deterministic)")
    p.add_argument("--validate-only", action="store_true", help="resolve the config and report, no compute")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    m = RunManifest(args.scenario, args.config, args.out, args.modes, args.tolerance, args.seed, args.validate_only)
    try:
        return run(m)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SymplecticDriftError as exc:
        print(f"drift error: {exc}", file=sys.stderr)
        return EXIT_DRIFT
    except UnphysicalStateError as exc:
        print(f"unphysical state: {exc}", file=sys.stderr)
        return EXIT_UNPHYSICAL


if __name__ == "__main__":
    sys.exit(main())
