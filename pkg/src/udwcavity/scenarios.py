"""The four canned experiments, with mode-count convergence control.

Each ``run_*`` function takes a :class:`ScenarioConfig` and returns a list of
:class:`ScenarioResult` tables.  Violations that should not abort a run
(non-convergence, thermality failures) are recorded in ``flags``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from typing import Callable, Optional

import numpy as np

from .cavity import (
    CavityConfig,
    DetectorConfig,
    DetectorSystem,
    GaussianSwitching,
    Inertial,
    Picture,
    SharpSwitching,
    UniformAcceleration,
)
from .config import ConfigError, ConvergenceSpec, DetectorSpec, ScenarioConfig
from .evolver import evolve_rows, evolve_static, infinity_norm, symplectic_drift
from .gaussian import (
    evolve_covariance,
    excitation_probability,
    log_negativity,
    nu_minus_one,
    reduce_state,
    symplectic_eigenvalues,
    thermality_gap,
)

# Unruh points must satisfy delta_p0 <= THERMALITY_RATIO * p1_therm.
THERMALITY_RATIO = 1e-5

FLAG_NONCONVERGENCE = "non-convergence"
FLAG_THERMALITY = "thermality"


@dataclass
class ScenarioResult:
    """One output table.  The first column is the parameter axis."""

    scenario: str
    label: str
    columns: dict
    metadata: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError("all series must match the axis length")

    @property
    def axis_name(self) -> str:
        return next(iter(self.columns))

    @property
    def axis(self) -> np.ndarray:
        return self.columns[self.axis_name]


@dataclass(frozen=True)
class ConvergencePolicy:
    """Raise N along ``schedule`` until ``observable`` changes by less than ``tolerance``."""

    schedule: tuple
    tolerance: float
    observable: str = ""

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.schedule[:-1], self.schedule[1:])):
            raise ValueError("schedule must be strictly increasing")
        if not self.schedule:
            raise ValueError("schedule must not be empty")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    @classmethod
    def from_spec(cls, spec: Optional[ConvergenceSpec], modes: int, observable: str) -> "ConvergencePolicy":
        if spec is None:
            return cls((modes,), 1.0, observable)
        return cls(tuple(spec.schedule), spec.tolerance, observable)


@dataclass
class ConvergenceReport:
    """Outcome of :func:`mode_convergence`.

    ``status`` is ``"converged"``, ``"not_converged"`` or ``"unchecked"`` (a
    single-entry schedule).  ``n_required`` is the smallest N whose
    observable differs from the next scheduled N by less than the tolerance;
    ``n_used`` is the finer N of that pair, whose payload is returned.
    """

    status: str
    n_required: Optional[int]
    n_used: int
    history: list
    observable: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "observable": self.observable,
            "n_required": self.n_required,
            "n_used": self.n_used,
            "history": [[n, _jsonable(v)] for n, v in self.history],
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [float(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def _change(a, b) -> float:
    a, b = np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))
    if a.shape != b.shape:
        return math.inf
    # an undefined observable (e.g. no onset at all) only matches itself
    na, nb = np.isnan(a), np.isnan(b)
    if np.any(na != nb) or np.any(np.isinf(a)) or np.any(np.isinf(b)):
        return math.inf
    if np.all(na):
        return 0.0
    return float(np.max(np.abs(a[~na] - b[~nb])))


def mode_convergence(evaluate: Callable, policy: ConvergencePolicy):
    """Walk ``policy.schedule`` calling ``evaluate(N) -> (observable, payload)``.

    Returns ``(report, payload)``.  Stops at the first pair of consecutive
    mode counts whose observables differ by less than the tolerance.  If the
    schedule runs out the report says so and the payload of the largest N is
    returned; callers must surface that status.
    """
    history = []
    prev = None
    for n in policy.schedule:
        obs, payload = evaluate(n)
        history.append((n, obs))
        if prev is not None and _change(prev[1], obs) < policy.tolerance:
            return ConvergenceReport("converged", prev[0], n, history, policy.observable), payload
        prev = (n, obs)
    status = "unchecked" if len(policy.schedule) == 1 else "not_converged"
    n_req = policy.schedule[0] if status == "unchecked" else None
    return ConvergenceReport(status, n_req, policy.schedule[-1], history, policy.observable), payload


# ---------------------------------------------------------------------------
# building systems from configs


def _switching(d: DetectorSpec, coupling=None, width=None):
    lam = d.coupling if coupling is None else coupling
    if d.switching == "gaussian":
        return GaussianSwitching(lam, d.width if width is None else width)
    return SharpSwitching(lam)


def _trajectory(d: DetectorSpec, acceleration=None):
    if d.trajectory == "accelerated":
        a = d.acceleration if acceleration is None else acceleration
        if a is None:
            raise ConfigError("accelerated trajectory needs an acceleration")
        return UniformAcceleration(a, d.position)
    return Inertial(d.position)


def build_cavity(cfg: ScenarioConfig, n_modes: int) -> CavityConfig:
    return CavityConfig.with_modes(cfg.length, cfg.boundary, n_modes, cfg.include_zero_mode, cfg.normalize_modes)


def build_system(
    cfg: ScenarioConfig,
    n_modes: int,
    picture: Optional[str] = None,
    width: Optional[float] = None,
    acceleration: Optional[float] = None,
    coupling: Optional[float] = None,
) -> DetectorSystem:
    """DetectorSystem for ``cfg`` with N modes; keyword overrides apply to every detector."""
    dets = tuple(
        DetectorConfig(d.gap, _switching(d, coupling, width), _trajectory(d, acceleration), d.squeezing)
        for d in cfg.detectors
    )
    return DetectorSystem(dets, build_cavity(cfg, n_modes), Picture(picture or cfg.picture))


def _check_physical(sigma: np.ndarray) -> None:
    if sigma.shape == (2, 2):
        nu_minus_one(sigma)
    else:
        symplectic_eigenvalues(sigma, tol=1e-8)


def _static_samples(system: DetectorSystem, taus: np.ndarray, rows=None):
    """S(tau) on a uniform grid starting at 0 for a constant generator.

    S(tau_k) = S(tau_{k-1}) exp(G h) since all factors commute, which also
    means selected rows can be propagated on their own: with ``rows`` given,
    the generator yields S(tau_k)[rows] only.
    """
    if system.picture is not Picture.FULL or not system.stationary:
        raise ValueError("static propagation needs a stationary system in the full picture")
    if any(not isinstance(d.switching, SharpSwitching) for d in system.detectors):
        raise ValueError("static propagation needs sharp switching")
    if taus[0] != 0.0:
        raise ValueError("static grids start at tau = 0")
    h = taus[1] - taus[0]
    if np.max(np.abs(np.diff(taus) - h)) > 1e-9 * max(1.0, taus[-1]):
        raise ValueError("static grids must be uniform")
    step = evolve_static(system.fsym(0.0), h)
    S = np.eye(step.shape[0])
    if rows is not None:
        S = S[list(rows)]
    for k in range(len(taus)):
        if k:
            S = S @ step
        yield S


def _uniform_grid(t_max: float, samples: int) -> np.ndarray:
    return np.linspace(0.0, t_max, samples)


def _meta_common(cfg: ScenarioConfig) -> dict:
    return {"integrator": asdict(cfg.integrator), "picture": cfg.picture}


def _map(fn, items, workers: int):
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# switching noise


def modes_for_width(n_base: int, delta: float, scaling_width: float) -> int:
    """Mode count for a Gaussian of width delta.

    The switching spectrum reaches frequencies of order 1/delta, so below
    ``scaling_width`` the mode count grows like n_base * scaling_width / delta.
    A scaling width of 0 keeps n_base everywhere.
    """
    if scaling_width <= 0 or delta >= scaling_width:
        return n_base
    return int(math.ceil(n_base * scaling_width / delta))


def _gaussian_excitation(cfg: ScenarioConfig, n_base: int, window_widths: float, delta: float):
    n_modes = modes_for_width(n_base, delta, cfg.sweep_value("mode_scaling_width", 0.0))
    system = build_system(cfg, n_modes, picture="interaction", width=delta)
    k = system.n_total
    res = evolve_rows(system, (-window_widths * delta, window_widths * delta), [0, k], cfg.integrator)
    s0 = system.initial_covariance()
    sigma = res.rows @ s0 @ res.rows.T
    sigma = 0.5 * (sigma + sigma.T)
    _check_physical(sigma)
    return excitation_probability(sigma), res.drift, n_modes


def run_switching_noise(cfg: ScenarioConfig, workers: int = 1) -> list:
    """Excitation of an inertial detector for Gaussian widths and for sharp switching."""
    if len(cfg.detectors) != 1:
        raise ConfigError("switching noise uses exactly one detector")
    widths = np.asarray(cfg.sweep_value("widths"), dtype=float)
    if widths.size == 0:
        raise ConfigError("[sweep] widths is required for switching_noise")
    wfac = cfg.sweep_value("window_widths", 4.0)
    t0 = time.perf_counter()

    def gaussian_series(n):
        out = _map(partial(_gaussian_excitation, cfg, n, wfac), list(widths), workers)
        exc = np.array([o[0] for o in out])
        return exc, (exc, max(o[1] for o in out), [o[2] for o in out])

    policy = ConvergencePolicy.from_spec(cfg.convergence, cfg.modes, "excitation_probability")
    rep, (exc, drift, per_width) = mode_convergence(gaussian_series, policy)
    gauss = ScenarioResult(
        "switching_noise",
        "gaussian",
        {"delta": widths, "excitation_probability": exc},
        {**_meta_common(cfg), "convergence": rep.as_dict(), "n_modes": rep.n_used, "n_required": rep.n_required,
         "modes_per_width": per_width, "mode_scaling_width": cfg.sweep_value("mode_scaling_width", 0.0),
         "max_drift": drift, "window_widths": wfac, "wall_time": time.perf_counter() - t0},
    )
    if rep.status == "not_converged":
        gauss.flags.append(FLAG_NONCONVERGENCE)

    t1 = time.perf_counter()
    sharp_cfg = replace(cfg, detectors=tuple(replace(d, switching="sharp", width=None) for d in cfg.detectors))
    taus = _uniform_grid(cfg.sweep_value("sharp_time_max", 10.0), cfg.sweep_value("sharp_samples", 201))
    sched = cfg.sweep_value("sharp_schedule")

    def sharp_series(n):
        system = build_system(sharp_cfg, n, picture="full")
        s0 = system.initial_covariance()
        k = system.n_total
        om = system.omega()
        vals, drift = [], 0.0
        for R in _static_samples(system, taus, rows=[0, k]):
            sig = evolve_covariance(R, s0)
            _check_physical(sig)
            vals.append(excitation_probability(sig))
            drift = max(drift, infinity_norm(R @ om @ R.T - om[np.ix_([0, k], [0, k])]))
        vals = np.array(vals)
        return vals, (vals, drift)

    sharp_modes = cfg.sweep_value("sharp_modes", cfg.modes)
    spolicy = ConvergencePolicy((sharp_modes,), 1.0, "excitation_probability")
    if sched is not None:
        spolicy = ConvergencePolicy(tuple(sched), cfg.sweep_value("sharp_tolerance"), "excitation_probability")
    srep, (sexc, sdrift) = mode_convergence(sharp_series, spolicy)
    sharp = ScenarioResult(
        "switching_noise",
        "sharp",
        {"tau": taus, "excitation_probability": sexc},
        {**_meta_common(cfg), "picture": "full", "convergence": srep.as_dict(), "n_modes": srep.n_used,
         "n_required": srep.n_required, "max_drift": sdrift, "wall_time": time.perf_counter() - t1},
    )
    if srep.status == "not_converged":
        sharp.flags.append(FLAG_NONCONVERGENCE)
    return [gauss, sharp]


# ---------------------------------------------------------------------------
# causality


def divergence_onset(x: np.ndarray, a: np.ndarray, b: np.ndarray, fraction: float) -> float:
    """First x where |a - b| exceeds ``fraction`` times its value at the last x."""
    d = np.abs(np.asarray(a) - np.asarray(b))
    final = d[-1]
    if final == 0.0:
        return math.nan
    above = np.nonzero(d > fraction * final)[0]
    return float(x[above[0]])


def run_causality(cfg: ScenarioConfig, mode_counts=None) -> list:
    """Excitation of detector 1 with its neighbour in the ground or a squeezed state."""
    if len(cfg.detectors) != 2:
        raise ConfigError("causality uses exactly two detectors")
    mode_counts = tuple(mode_counts or cfg.sweep_value("mode_counts", (cfg.modes,)))
    tau_c = abs(cfg.detectors[1].position - cfg.detectors[0].position)
    if tau_c <= 0:
        raise ConfigError("causality needs separated detectors")
    x = _uniform_grid(cfg.sweep_value("tau_max_over_tauc", 1.5), cfg.sweep_value("samples", 601))
    eta = cfg.sweep_value("onset_fraction", 0.01)
    gap = max(d.gap for d in cfg.detectors)
    results = []
    for n in mode_counts:
        t0 = time.perf_counter()
        system = build_system(cfg, n, picture="full")
        if np.max(system.cavity.frequencies()) < gap:
            raise ConfigError(f"{n} modes do not reach the detector resonance at {gap}")
        s_sq = system.initial_covariance()
        s_gr = np.eye(s_sq.shape[0])
        pg, ps, drift, det_dev = [], [], 0.0, 0.0
        for S in _static_samples(system, x * tau_c):
            sg = reduce_state(evolve_covariance(S, s_gr), [0])
            ss = reduce_state(evolve_covariance(S, s_sq), [0])
            _check_physical(sg)
            _check_physical(ss)
            pg.append(excitation_probability(sg))
            ps.append(excitation_probability(ss))
            drift = max(drift, symplectic_drift(S))
        sign, logdet = np.linalg.slogdet(evolve_covariance(S, s_sq))
        det_dev = abs(sign * math.exp(logdet) - 1.0)
        pg, ps = np.array(pg), np.array(ps)
        onset = divergence_onset(x, pg, ps, eta)
        # absolute separation before light could have crossed, a cutoff-leakage diagnostic
        early = np.abs(pg - ps)[x < 1.0]
        leak = float(early.max()) if early.size else math.nan
        results.append(
            ScenarioResult(
                "causality",
                f"N{n}",
                {"tau_over_tauc": x, "p_ground_neighbor": pg, "p_squeezed_neighbor": ps},
                {**_meta_common(cfg), "picture": "full", "n_modes": n, "n_required": n,
                 "convergence": {"status": "fixed", "n_required": n},
                 "onset_tau_over_tauc": onset, "onset_fraction": eta, "tau_c": tau_c,
                 "precausal_max_separation": leak, "final_separation": float(abs(pg[-1] - ps[-1])),
                 "max_drift": drift, "final_det_deviation": det_dev, "wall_time": time.perf_counter() - t0},
            )
        )
    return results


# ---------------------------------------------------------------------------
# Unruh


@dataclass
class UnruhPoint:
    acceleration: float
    nu_minus_one: float
    temperature: float
    delta_p0: float
    p1_therm: float
    drift: float
    evaluations: int


def unruh_point(cfg: ScenarioConfig, n_modes: int, acceleration: float) -> UnruhPoint:
    """Detector state after a Gaussian-switched pass along the hyperbola."""
    d = cfg.detectors[0]
    if d.switching != "gaussian":
        raise ConfigError("the Unruh scenario uses Gaussian switching")
    wfac = cfg.sweep_value("window_widths", 4.0)
    system = build_system(cfg, n_modes, acceleration=acceleration)
    k = system.n_total
    res = evolve_rows(system, (-wfac * d.width, wfac * d.width), [0, k], cfg.integrator)
    sigma = res.rows @ system.initial_covariance() @ res.rows.T
    sigma = 0.5 * (sigma + sigma.T)
    nm1 = nu_minus_one(sigma)
    gap_p0, p1 = thermality_gap(sigma)
    # same as temperature(1 + nm1, gap) but without rounding nu - 1
    temp = d.gap / math.log1p(2.0 / nm1) if nm1 > 0 else 0.0
    return UnruhPoint(acceleration, nm1, temp, gap_p0, p1, res.drift, res.n_evaluations)


def _unruh_converged(cfg: ScenarioConfig, acceleration: float):
    policy = ConvergencePolicy.from_spec(cfg.convergence, cfg.modes, "temperature")

    def evaluate(n):
        p = unruh_point(cfg, n, acceleration)
        return p.temperature, p

    return mode_convergence(evaluate, policy)


def linear_fit(x: np.ndarray, y: np.ndarray):
    """Ordinary least squares y = slope x + intercept; returns (slope, intercept, R^2)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def run_unruh(cfg: ScenarioConfig, accelerations=None, workers: int = 1) -> list:
    """Temperature and thermality of a uniformly accelerated detector across accelerations."""
    if len(cfg.detectors) != 1:
        raise ConfigError("the Unruh scenario uses exactly one detector")
    if cfg.boundary != "periodic":
        raise ConfigError("the Unruh scenario uses a periodic cavity")
    acc = np.asarray(accelerations if accelerations is not None else cfg.sweep_value("accelerations", ()), float)
    if acc.size == 0:
        raise ConfigError("[sweep] accelerations is required for unruh")
    t0 = time.perf_counter()
    out = _map(partial(_unruh_converged, cfg), list(acc), workers)
    reports = [r for r, _ in out]
    pts = [p for _, p in out]
    nu = np.array([1.0 + p.nu_minus_one for p in pts])
    temp = np.array([p.temperature for p in pts])
    gap = np.array([p.delta_p0 for p in pts])
    p1 = np.array([p.p1_therm for p in pts])
    bad = [float(a) for a, g, q in zip(acc, gap, p1) if not g <= THERMALITY_RATIO * q]
    slope, intercept, r2 = linear_fit(acc, temp) if acc.size > 1 else (math.nan, math.nan, math.nan)
    meta = {
        **_meta_common(cfg),
        "n_modes": [r.n_used for r in reports],
        "n_required": max((r.n_required or r.n_used) for r in reports),
        "convergence": [r.as_dict() for r in reports],
        "nu_minus_one": [p.nu_minus_one for p in pts],
        "max_drift": max(p.drift for p in pts),
        "window_widths": cfg.sweep_value("window_widths", 4.0),
        "thermality_ratio_limit": THERMALITY_RATIO,
        "thermality_failures": bad,
        "fit_slope": slope,
        "fit_intercept": intercept,
        "fit_r2": r2,
        "wall_time": time.perf_counter() - t0,
    }
    res = ScenarioResult(
        "unruh",
        "temperature",
        {"acceleration": acc, "nu": nu, "temperature": temp, "delta_p0": gap, "p1_therm": p1},
        meta,
    )
    if bad:
        res.flags.append(FLAG_THERMALITY)
    if any(r.status == "not_converged" for r in reports):
        res.flags.append(FLAG_NONCONVERGENCE)
    return [res]


# ---------------------------------------------------------------------------
# entanglement harvesting


def first_crossing(x: np.ndarray, y: np.ndarray, threshold: float) -> float:
    above = np.nonzero(np.asarray(y) > threshold)[0]
    return float(x[above[0]]) if above.size else math.nan


def _harvest_series(cfg: ScenarioConfig, n_modes: int, x: np.ndarray, tau_c: float):
    system = build_system(cfg, n_modes, picture="full")
    s0 = system.initial_covariance()
    en, drift = [], 0.0
    for S in _static_samples(system, x * tau_c):
        sig = reduce_state(evolve_covariance(S, s0), [0, 1])
        _check_physical(sig)
        d = symplectic_drift(S)
        # nu_minus cannot be resolved more finely than S is symplectic
        en.append(log_negativity(sig, floor=d))
        drift = max(drift, d)
    sign, logdet = np.linalg.slogdet(evolve_covariance(S, s0))
    return np.array(en), drift, abs(sign * math.exp(logdet) - 1.0)


def run_harvesting(cfg: ScenarioConfig, coupling: Optional[float] = None) -> list:
    """Logarithmic negativity between two static detectors over time."""
    if len(cfg.detectors) != 2:
        raise ConfigError("harvesting uses exactly two detectors")
    if coupling is not None:
        cfg = replace(cfg, detectors=tuple(replace(d, coupling=coupling) for d in cfg.detectors))
    tau_c = abs(cfg.detectors[1].position - cfg.detectors[0].position)
    x = _uniform_grid(cfg.sweep_value("tau_max_over_tauc", 1.2), cfg.sweep_value("samples", 481))
    thr = cfg.sweep_value("onset_threshold", 1e-6)
    t0 = time.perf_counter()

    def evaluate(n):
        en, drift, det_dev = _harvest_series(cfg, n, x, tau_c)
        return first_crossing(x, en, thr), (en, drift, det_dev)

    policy = ConvergencePolicy.from_spec(cfg.convergence, cfg.modes, "onset_tau_over_tauc")
    rep, (en, drift, det_dev) = mode_convergence(evaluate, policy)
    res = ScenarioResult(
        "harvesting",
        "log_negativity",
        {"tau_over_tauc": x, "log_negativity": en},
        {**_meta_common(cfg), "picture": "full", "n_modes": rep.n_used, "n_required": rep.n_required,
         "convergence": rep.as_dict(), "onset_threshold": thr, "onset_tau_over_tauc": first_crossing(x, en, thr),
         "tau_c": tau_c, "max_drift": drift, "final_det_deviation": det_dev,
         "wall_time": time.perf_counter() - t0},
    )
    if rep.status == "not_converged":
        res.flags.append(FLAG_NONCONVERGENCE)
    return [res]


RUNNERS = {
    "switching_noise": run_switching_noise,
    "causality": run_causality,
    "unruh": run_unruh,
    "harvesting": run_harvesting,
}
