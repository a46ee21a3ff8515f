"""Independent Hilbert-space route for ground-state inputs.

An exponential-quadratic ansatz for the evolution operator acting on the
vacuum turns the Schrodinger equation into matrix ODEs for a complex symmetric
squeezing generator C and a phase generator D (interaction picture):

    i dC/dtau = 4 C_s g^dag C_s + 2 w C_s + g
    i dD/dtau = (4 C_s g^dag + w)(D + I)

with C_s the symmetric part of C.  A Takagi factorisation of 2 C_s gives the
squeezing parameters and hence the covariance matrix, without touching the
symplectic propagator.  Valid while ||2 C_s|| stays below 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import sqrtm

from .cavity import DetectorSystem, Picture

NONSINGULAR_MARGIN = 1e-10


class OracleBreakdownError(RuntimeError):
    """Raised when the squeezing generator approaches the singular boundary."""


@dataclass
class OracleState:
    tau: float
    C: np.ndarray
    D: np.ndarray

    @property
    def C_sym(self) -> np.ndarray:
        return 0.5 * (self.C + self.C.T)


@dataclass
class OracleTrajectory:
    states: list
    max_consistency_residual: float

    @property
    def final(self) -> OracleState:
        return self.states[-1]


def consistency_residual(C: np.ndarray, D: np.ndarray) -> float:
    """Largest entry of |I - 4 C_s C_s^* - (D + I)(D + I)^dag|."""
    cs = 0.5 * (C + C.T)
    e = D + np.eye(D.shape[0])
    return float(np.max(np.abs(np.eye(D.shape[0]) - 4 * cs @ cs.conj() - e @ e.conj().T)))


def evolve_cd(
    system: DetectorSystem,
    window: tuple,
    cfg=None,
    samples: Optional[Sequence[float]] = None,
    residual_ceiling: float = 1e-7,
) -> OracleTrajectory:
    """Integrate (C, D) from C = D = 0 at ``window[0]``.

    ``cfg`` is an IntegratorConfig whose adaptive scheme and tolerances are
    used; the fixed-step method is not offered here.  ``samples`` default to
    the window end.  The consistency relation is checked at every sample and
    integration aborts if its residual exceeds ``residual_ceiling``.  Raises
    :class:`OracleBreakdownError` if ||2 C_s|| comes within
    ``NONSINGULAR_MARGIN`` of 1 at any sample.
    """
    if cfg is None:
        from .evolver import IntegratorConfig

        cfg = IntegratorConfig()
    if system.picture is not Picture.INTERACTION:
        system = DetectorSystem(system.detectors, system.cavity, Picture.INTERACTION)
    if any(d.squeezing != 0.0 for d in system.detectors):
        raise ValueError("the oracle only handles vacuum initial states")
    t0, t1 = map(float, window)
    k = system.n_total
    eye = np.eye(k)
    samples = np.array([t1] if samples is None else sorted(samples), dtype=float)

    def rhs(t, y):
        C = y[: k * k].reshape(k, k)
        D = y[k * k:].reshape(k, k)
        c = system.couplings(t)
        cs = 0.5 * (C + C.T)
        gh = c.g.conj().T
        dC = -1j * (4 * cs @ gh @ cs + 2 * c.w @ cs + c.g)
        dD = -1j * (4 * cs @ gh + c.w) @ (D + eye)
        return np.concatenate([dC.ravel(), dD.ravel()])

    y = np.zeros(2 * k * k, dtype=complex)
    states = []
    if samples[0] == t0:
        states.append(OracleState(t0, np.zeros((k, k), complex), np.zeros((k, k), complex)))
    cuts = [t0] + [b for b in system.breakpoints() if t0 < b < t1] + [t1]
    hmax = cfg.step_ceiling(system)
    worst = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        inside = samples[(samples > a) & (samples <= b)]
        stops = np.union1d(inside, [b])
        sol = solve_ivp(
            rhs, (a, b), y, method=cfg.scheme, rtol=cfg.rtol, atol=cfg.atol, max_step=hmax, t_eval=stops
        )
        if not sol.success:
            raise RuntimeError(f"oracle integration failed: {sol.message}")
        for j, s in enumerate(stops):
            C = sol.y[: k * k, j].reshape(k, k)
            D = sol.y[k * k:, j].reshape(k, k)
            norm = np.linalg.norm(C + C.T, 2)
            if norm >= 1.0 - NONSINGULAR_MARGIN:
                raise OracleBreakdownError(f"||2 C_s|| = {norm:.6f} reached the singular boundary at tau={s}")
            res = consistency_residual(C, D)
            if res > residual_ceiling:
                raise OracleBreakdownError(f"consistency residual {res:.2e} above {residual_ceiling:.0e} at tau={s}")
            worst = max(worst, res)
            if s in inside:
                states.append(OracleState(float(s), C, D))
        y = sol.y[:, -1]
    return OracleTrajectory(states, worst)


def takagi(A: np.ndarray, tol: float = 1e-10):
    """Takagi factorisation A = W diag(t) W^T of a complex symmetric matrix.

    From the SVD A = U diag(t) V^dag the matrix Z = U^dag V^* is unitary and
    commutes with diag(t); W = U Z^{1/2} then satisfies the factorisation.
    Returns (t, W) with t sorted in descending order.
    """
    A = np.asarray(A, dtype=complex)
    if np.max(np.abs(A - A.T)) > tol * max(1.0, np.max(np.abs(A))):
        raise ValueError("Takagi factorisation needs a symmetric matrix")
    if np.max(np.abs(A)) == 0.0:
        return np.zeros(A.shape[0]), np.eye(A.shape[0], dtype=complex)
    u, t, vh = np.linalg.svd(A)
    z = u.conj().T @ vh.T
    W = u @ sqrtm(z)
    return t, W


@dataclass
class SqueezingDecomposition:
    """z = r e^{i theta}-type data extracted from (C, D).

    ``W`` and ``s`` give the Takagi form z = W diag(s) W^T, from which
    r = W diag(s) W^dag and e^{i theta} = W W^T.  ``phase`` is e^{i phi}.
    """

    W: np.ndarray
    s: np.ndarray
    phase: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return (self.W * self.s) @ self.W.T

    @property
    def r(self) -> np.ndarray:
        return (self.W * self.s) @ self.W.conj().T

    @property
    def e_itheta(self) -> np.ndarray:
        return self.W @ self.W.T


def squeezing_from_c(state: OracleState, tol: float = 1e-9) -> SqueezingDecomposition:
    """Takagi-factorise 2 C_s and map its singular values through arctanh.

    The phase rotation follows from D + I = sech(r) e^{i phi}.
    """
    k = state.C.shape[0]
    t, W = takagi(2 * state.C_sym)
    resid = np.max(np.abs((W * t) @ W.T - 2 * state.C_sym)) if k else 0.0
    if resid > tol:
        raise OracleBreakdownError(f"Takagi residual {resid:.2e} exceeds {tol:.0e}")
    if np.any(t >= 1.0):
        raise OracleBreakdownError("Takagi values of 2 C_s reached 1")
    s = np.arctanh(t)
    cosh_r = (W * np.cosh(s)) @ W.conj().T
    phase = cosh_r @ (state.D + np.eye(k))
    return SqueezingDecomposition(W, s, phase)


def covariance_from_squeezing(d: SqueezingDecomposition, tol: float = 1e-10) -> np.ndarray:
    """Covariance (qq..pp order) of S(z)|0>.

    With c = cosh(2r) and p = sinh(2r) e^{i theta} the blocks read
    qq = Re(c + p), pp = Re(c - p), qp = Im(p - c); the complex block formulas
    are evaluated first and their imaginary residue is checked.
    """
    W, s = d.W, d.s
    c = (W * np.cosh(2 * s)) @ W.conj().T
    p = (W * np.sinh(2 * s)) @ W.T
    qq = 0.5 * (c + p + c.T + p.conj())
    pp = 0.5 * (c - p + c.T - p.conj())
    qp = 0.5j * (c - p - c.T + p.conj())
    sigma = np.block([[qq, qp], [qp.T, pp]])
    if np.max(np.abs(sigma.imag)) > tol * max(1.0, np.max(np.abs(sigma))):
        raise OracleBreakdownError("covariance blocks have a non-negligible imaginary part")
    sigma = sigma.real
    return 0.5 * (sigma + sigma.T)


def covariance_from_cd(state: OracleState) -> np.ndarray:
    return covariance_from_squeezing(squeezing_from_c(state))


def bogoliubov(state: OracleState):
    """Bogoliubov matrices (alpha, beta) of the evolution, a -> alpha a + beta a^dag.

    alpha = cosh(r) e^{i phi} and beta = sinh(r) e^{i theta} e^{-i phi^T}.
    """
    d = squeezing_from_c(state)
    cosh_r = (d.W * np.cosh(d.s)) @ d.W.conj().T
    sinh_r_phase = (d.W * np.sinh(d.s)) @ d.W.T
    alpha = cosh_r @ d.phase
    beta = sinh_r_phase @ d.phase.conj()
    return alpha, beta


def symplectic_from_bogoliubov(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Real symplectic matrix (qq..pp order) equivalent to (alpha, beta)."""
    return np.block(
        [
            [(alpha + beta).real, -(alpha - beta).imag],
            [(alpha + beta).imag, (alpha - beta).real],
        ]
    )


def cross_validate(system: DetectorSystem, window: tuple, cfgs=None) -> float:
    """Largest entry of |sigma_symplectic - sigma_oracle| at the window end.

    ``cfgs`` is an optional pair of IntegratorConfig objects, for the
    symplectic route and the oracle respectively.  Both routes start from the
    total vacuum in the interaction picture.
    """
    from .evolver import IntegratorConfig, evolve
    from .gaussian import evolve_covariance

    icfg, ocfg = cfgs if cfgs is not None else (IntegratorConfig(), IntegratorConfig())
    if system.picture is not Picture.INTERACTION:
        system = DetectorSystem(system.detectors, system.cavity, Picture.INTERACTION)
    S = evolve(system, window, icfg).final
    sigma_s = evolve_covariance(S, np.eye(S.shape[0]))
    sigma_o = covariance_from_cd(evolve_cd(system, window, ocfg).final)
    return float(np.max(np.abs(sigma_s - sigma_o)))
