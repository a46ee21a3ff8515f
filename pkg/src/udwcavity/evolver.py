"""Symplectic propagation of the coupled detector-field system.

The symplectic matrix obeys dS/dtau = Omega F_sym(tau) S with S(tau_i) = I, so
that sigma(tau) = S sigma(tau_i) S^T.  Two integrators are offered: a fixed
step classical RK4 written out here and scipy's adaptive Runge-Kutta pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .cavity import DetectorSystem
from .gaussian import symplectic_form

# Default step ceiling as a fraction of the shortest period in the problem.
STEPS_PER_PERIOD_FRACTION = 0.05


class SymplecticDriftError(RuntimeError):
    """Raised when the propagated matrix drifts too far from the symplectic group."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Numerical settings.

    method: ``"rk45_adaptive"`` or ``"rk4_fixed"``.
    scheme: Runge-Kutta pair used by the adaptive method (``"DOP853"`` or ``"RK45"``).
    dt: step for the fixed method; defaults to the step ceiling.
    max_step: step ceiling; defaults to 0.05 * 2 pi / omega_max.
    resymplectify_every: for the fixed method, project back onto the group
        every this many steps (0 disables).
    drift_ceiling: abort threshold for ||S Omega S^T - Omega||.
    """

    method: str = "rk45_adaptive"
    scheme: str = "DOP853"
    rtol: float = 1e-11
    atol: float = 1e-13
    dt: Optional[float] = None
    max_step: Optional[float] = None
    resymplectify_every: int = 0
    drift_ceiling: float = 1e-6

    def __post_init__(self):
        if self.method not in ("rk45_adaptive", "rk4_fixed"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if self.scheme not in ("DOP853", "RK45"):
            raise ValueError(f"unknown Runge-Kutta scheme {self.scheme!r}")
        for name in ("rtol", "atol", "drift_ceiling"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("dt", "max_step"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")

    def step_ceiling(self, system: DetectorSystem) -> float:
        if self.max_step is not None:
            return self.max_step
        return STEPS_PER_PERIOD_FRACTION * 2.0 * math.pi / system.max_frequency()


@dataclass
class Trajectory:
    """Sampled propagation result.

    ``S`` has shape (len(times), 2K, 2K); ``drift`` holds the symplectic drift
    at each sample.
    """

    times: np.ndarray
    S: np.ndarray
    drift: np.ndarray
    n_evaluations: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.S[-1]

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))


def infinity_norm(m: np.ndarray) -> float:
    """Induced infinity norm: the largest absolute row sum."""
    return float(np.max(np.sum(np.abs(m), axis=1)))


def symplectic_drift(S: np.ndarray) -> float:
    """||S Omega S^T - Omega|| in the induced infinity norm."""
    om = symplectic_form(S.shape[0] // 2)
    return infinity_norm(S @ om @ S.T - om)


def check_symplectic(S: np.ndarray, tol: float = 1e-8) -> float:
    """Return the drift of S; raise if it exceeds ``tol``."""
    d = symplectic_drift(S)
    if not d <= tol:
        raise SymplecticDriftError(f"symplectic drift {d:.3e} exceeds {tol:.1e}")
    return d


def resymplectify(S: np.ndarray, tol: float = 1e-14, max_iter: int = 20) -> np.ndarray:
    """Pull a nearly symplectic S back onto the group.

    Iterates S <- (S + Omega S^{-T} Omega^T) / 2.  The map S -> Omega S^{-T}
    Omega^T fixes symplectic matrices and flips the sign of the first-order
    non-symplectic part of a perturbation, so the average removes it and the
    iteration converges quadratically, in the same way as the Newton
    iteration for the orthogonal polar factor.
    """
    om = symplectic_form(S.shape[0] // 2)
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e12:
        raise SymplecticDriftError("matrix is too degenerate to resymplectify")
    for _ in range(max_iter):
        if symplectic_drift(S) <= tol:
            break
        S = 0.5 * (S + om @ np.linalg.inv(S).T @ om.T)
    return S


def _apply_generator(system: DetectorSystem, tau: float, Y: np.ndarray) -> np.ndarray:
    """Omega F_sym(tau) Y using the detector-only support of the coupling."""
    diag, idx, rows = system.generator_rows(tau)
    k = system.n_total
    Z = diag[:, None] * Y
    Z[idx] += rows @ Y
    # detectors do not couple to each other, so rows[:, idx] vanishes and the
    # symmetric counterpart can be added to every row
    Z += rows.T @ Y[idx]
    out = np.empty_like(Z)
    out[:k] = Z[k:]
    out[k:] = -Z[:k]
    return out


def generator(system: DetectorSystem, tau: float) -> np.ndarray:
    """Dense Omega F_sym(tau)."""
    return system.omega() @ system.fsym(tau)


def _segments(system: DetectorSystem, t0: float, t1: float, samples: np.ndarray):
    cuts = [t0] + [b for b in system.breakpoints() if t0 < b < t1] + [t1]
    for a, b in zip(cuts[:-1], cuts[1:]):
        yield a, b, samples[(samples > a) & (samples <= b)]


def _rk4(rhs, y, a, b, dt, project_every=0):
    """Classical RK4 from a to b with the largest uniform step not above dt."""
    n = max(1, int(math.ceil((b - a) / dt - 1e-12)))
    h = (b - a) / n
    for i in range(n):
        t = a + i * h
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if project_every and (i + 1) % project_every == 0:
            y = resymplectify(y)
    return y, 4 * n


def evolve(
    system: DetectorSystem,
    window: tuple,
    cfg: IntegratorConfig = IntegratorConfig(),
    samples: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Propagate S from ``window[0]`` to ``window[1]``.

    ``samples`` are the proper times at which S is reported (the window end
    by default).  Switching discontinuities inside the window become
    integration boundaries, so no step straddles them.
    """
    t0, t1 = map(float, window)
    if not t1 > t0:
        raise ValueError("window must have positive length")
    samples = np.array([t1] if samples is None else sorted(samples), dtype=float)
    if samples.size and (samples[0] < t0 or samples[-1] > t1):
        raise ValueError("sample times must lie inside the window")
    dim = 2 * system.n_total
    hmax = cfg.step_ceiling(system)

    def rhs_mat(t, Y):
        return _apply_generator(system, t, Y)

    def rhs_flat(t, y):
        return _apply_generator(system, t, y.reshape(dim, dim)).ravel()

    S = np.eye(dim)
    out_t, out_S = [], []
    if samples.size and samples[0] == t0:
        out_t.append(t0)
        out_S.append(S.copy())
    nfev = 0
    for a, b, inside in _segments(system, t0, t1, samples[samples > t0]):
        if cfg.method == "rk4_fixed":
            dt = min(cfg.dt or hmax, hmax)
            stops = np.union1d(inside, [b])
            cur = a
            for s in stops:
                if s > cur:
                    S, n = _rk4(rhs_mat, S, cur, s, dt, cfg.resymplectify_every)
                    nfev += n
                cur = s
                if s in inside:
                    out_t.append(s)
                    out_S.append(S.copy())
        else:
            stops = np.union1d(inside, [b])
            sol = solve_ivp(
                rhs_flat, (a, b), S.ravel(), method=cfg.scheme, rtol=cfg.rtol, atol=cfg.atol,
                max_step=hmax, t_eval=stops,
            )
            if not sol.success:
                raise RuntimeError(f"integration failed: {sol.message}")
            nfev += sol.nfev
            for j, s in enumerate(stops):
                if s in inside:
                    out_t.append(s)
                    out_S.append(sol.y[:, j].reshape(dim, dim))
            S = sol.y[:, -1].reshape(dim, dim)
        drift = symplectic_drift(S)
        if drift > cfg.drift_ceiling:
            raise SymplecticDriftError(f"symplectic drift {drift:.3e} exceeds ceiling {cfg.drift_ceiling:.1e}")
    Ss = np.array(out_S)
    drifts = np.array([symplectic_drift(s) for s in Ss])
    return Trajectory(np.array(out_t), Ss, drifts, nfev)


def evolve_static(f_sym: np.ndarray, duration: float) -> np.ndarray:
    """S = expm(Omega F_sym duration) for a time-independent generator."""
    f_sym = np.asarray(f_sym, dtype=float)
    if f_sym.ndim != 2 or f_sym.shape[0] != f_sym.shape[1] or f_sym.shape[0] % 2:
        raise ValueError("F_sym must be 2K x 2K")
    if np.max(np.abs(f_sym - f_sym.T)) > 1e-12 * max(1.0, np.max(np.abs(f_sym))):
        raise ValueError("F_sym must be symmetric")
    return expm(symplectic_form(f_sym.shape[0] // 2) @ f_sym * duration)


@dataclass
class RowsResult:
    """Selected rows of S(window end), obtained by backward integration."""

    rows: np.ndarray
    drift: float
    n_evaluations: int


def evolve_rows(
    system: DetectorSystem,
    window: tuple,
    indices: Sequence[int],
    cfg: IntegratorConfig = IntegratorConfig(),
) -> RowsResult:
    """Rows ``indices`` of S(window end), integrated backwards in time.

    R(tau) = E S(t1) S(tau)^{-1} satisfies dR/dtau = -R Omega F_sym(tau) with
    R(t1) = E, so R(t0) = E S(t1).  The cost is linear in the number of rows
    instead of the full dimension, which is what makes large mode counts
    affordable when only a few quadratures are needed.  ``drift`` is the
    largest entry of |R Omega R^T - E Omega E^T|.
    """
    t0, t1 = map(float, window)
    if not t1 > t0:
        raise ValueError("window must have positive length")
    idx = np.asarray(indices, dtype=int)
    dim = 2 * system.n_total
    om = symplectic_form(system.n_total)
    r = len(idx)
    hmax = cfg.step_ceiling(system)

    def rhs(t, y):
        # transposed: d(R^T)/dtau = F_sym Omega R^T
        Rt = y.reshape(r, dim).T
        k = system.n_total
        X = np.empty_like(Rt)
        X[:k] = Rt[k:]
        X[k:] = -Rt[:k]
        diag, di, rows = system.generator_rows(t)
        Z = diag[:, None] * X
        Z[di] += rows @ X
        Z += rows.T @ X[di]
        return Z.T.ravel()

    R = np.eye(dim)[idx]
    cuts = [t0] + [b for b in system.breakpoints() if t0 < b < t1] + [t1]
    nfev = 0
    for a, b in reversed(list(zip(cuts[:-1], cuts[1:]))):
        if cfg.method == "rk4_fixed":
            dt = min(cfg.dt or hmax, hmax)
            y, n = _rk4(lambda t, y: -rhs(-t, y), R.ravel(), -b, -a, dt)
            nfev += n
        else:
            sol = solve_ivp(rhs, (b, a), R.ravel(), method=cfg.scheme, rtol=cfg.rtol, atol=cfg.atol, max_step=hmax)
            if not sol.success:
                raise RuntimeError(f"integration failed: {sol.message}")
            nfev += sol.nfev
            y = sol.y[:, -1]
        R = y.reshape(r, dim)
    drift = infinity_norm(R @ om @ R.T - om[np.ix_(idx, idx)])
    if drift > cfg.drift_ceiling:
        raise SymplecticDriftError(f"row drift {drift:.3e} exceeds ceiling {cfg.drift_ceiling:.1e}")
    return RowsResult(R, drift, nfev)
