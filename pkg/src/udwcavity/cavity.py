"""Cavity field modes, detector trajectories and the quadratic Hamiltonian.

The total Hamiltonian of detectors plus truncated field is written as

    H = sum_ij w_ij a_i^dag a_j + g_ij a_i^dag a_j^dag + g_ij^* a_i a_j

with ``w`` Hermitian and ``g`` symmetric.  Index order is detectors first, then
field modes.  The generator of the covariance flow is the real symmetric
``F_sym`` built from ``(w, g)``; see :func:`f_matrix`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .gaussian import squeezed_vacuum, symplectic_form


class Boundary(str, enum.Enum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"


class Picture(str, enum.Enum):
    INTERACTION = "interaction"
    FULL = "full"


class ConfigurationError(ValueError):
    """Raised for physically or structurally invalid system definitions."""


# ---------------------------------------------------------------------------
# cavity


@dataclass(frozen=True)
class CavityConfig:
    """A 1+1 dimensional cavity of length ``length``.

    ``mode_indices`` lists the retained integer labels n.  Dirichlet modes are
    ``sin(n pi x / L)`` with n >= 1.  Periodic modes are ``exp(2 pi i n x / L)``
    with n != 0 unless ``include_zero_mode`` is set.  With ``normalize`` the
    mode functions carry the usual Klein-Gordon factor; by default they are
    left unnormalised.
    """

    length: float
    boundary: Boundary
    mode_indices: tuple
    include_zero_mode: bool = False
    normalize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "mode_indices", tuple(int(n) for n in self.mode_indices))
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ConfigurationError("cavity length must be positive and finite")
        if not self.mode_indices:
            raise ConfigurationError("at least one field mode is required")
        if len(set(self.mode_indices)) != len(self.mode_indices):
            raise ConfigurationError("duplicate mode indices")
        if self.boundary is Boundary.DIRICHLET:
            if min(self.mode_indices) < 1:
                raise ConfigurationError("Dirichlet mode indices start at 1")
        elif 0 in self.mode_indices:
            if not self.include_zero_mode:
                raise ConfigurationError("periodic zero mode requested but include_zero_mode is off")
            if self.normalize:
                raise ConfigurationError("the zero mode cannot be normalised")

    @classmethod
    def with_modes(cls, length, boundary, n_modes, include_zero_mode=False, normalize=False):
        """Lowest ``n_modes`` Dirichlet modes, or ``+/-1..n_modes`` periodic modes."""
        boundary = Boundary(boundary)
        if n_modes < 1:
            raise ConfigurationError("n_modes must be >= 1")
        if boundary is Boundary.DIRICHLET:
            idx = tuple(range(1, n_modes + 1))
        else:
            idx = tuple(range(-n_modes, 0)) + ((0,) if include_zero_mode else ()) + tuple(range(1, n_modes + 1))
        return cls(length, boundary, idx, include_zero_mode, normalize)

    @property
    def n_modes(self) -> int:
        return len(self.mode_indices)

    def wavenumbers(self) -> np.ndarray:
        n = np.asarray(self.mode_indices, dtype=float)
        if self.boundary is Boundary.DIRICHLET:
            return n * np.pi / self.length
        return 2.0 * n * np.pi / self.length

    def frequencies(self) -> np.ndarray:
        return np.abs(self.wavenumbers())

    def normalization(self) -> np.ndarray:
        if not self.normalize:
            return np.ones(self.n_modes)
        om = self.frequencies()
        if self.boundary is Boundary.DIRICHLET:
            return 1.0 / np.sqrt(om * self.length)
        return 1.0 / np.sqrt(2.0 * om * self.length)

    def spatial_profile(self, x) -> np.ndarray:
        """v_n(x) for every retained mode; shape ``x.shape + (N,)``."""
        k = self.wavenumbers()
        x = np.asarray(x, dtype=float)[..., None]
        if self.boundary is Boundary.DIRICHLET:
            v = np.sin(k * x).astype(complex)
        else:
            v = np.exp(1j * k * x)
        return v * self.normalization()

    def mode_function(self, t, x) -> np.ndarray:
        """u_n(t, x) = exp(-i omega_n t) v_n(x)."""
        t = np.asarray(t, dtype=float)[..., None]
        return np.exp(-1j * self.frequencies() * t) * self.spatial_profile(x)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Inertial:
    """Detector at rest at position ``x0``; t = tau."""

    x0: float

    def evaluate(self, tau):
        tau = np.asarray(tau, dtype=float)
        return tau.copy(), np.full_like(tau, self.x0)

    def redshift(self, tau):
        return np.ones_like(np.asarray(tau, dtype=float))

    @property
    def stationary(self) -> bool:
        return True


@dataclass(frozen=True)
class UniformAcceleration:
    """Hyperbolic trajectory t = sinh(a tau)/a, x = x0 + (cosh(a tau) - 1)/a.

    At tau = 0 the detector is at rest at ``x0``.
    """

    acceleration: float
    x0: float = 0.0

    def __post_init__(self):
        if not (self.acceleration > 0 and math.isfinite(self.acceleration)):
            raise ConfigurationError("acceleration must be positive and finite")

    def evaluate(self, tau):
        a = self.acceleration
        tau = np.asarray(tau, dtype=float)
        t = np.sinh(a * tau) / a
        # cosh(u) - 1 = 2 sinh(u/2)^2 avoids cancellation for small a tau
        x = self.x0 + 2.0 * np.sinh(0.5 * a * tau) ** 2 / a
        return t, x

    def redshift(self, tau):
        return np.cosh(self.acceleration * np.asarray(tau, dtype=float))

    @property
    def stationary(self) -> bool:
        return False


@dataclass(frozen=True)
class CustomTrajectory:
    """User-supplied ``(t(tau), x(tau))``.

    ``dt_dtau`` is optional; when missing it is estimated by central
    differences.  Evaluation raises if t is not increasing in tau.
    """

    t_of_tau: Callable
    x_of_tau: Callable
    dt_dtau: Optional[Callable] = None
    step: float = 1e-6

    def evaluate(self, tau):
        tau = np.asarray(tau, dtype=float)
        self.redshift(tau)
        return np.asarray(self.t_of_tau(tau), dtype=float), np.asarray(self.x_of_tau(tau), dtype=float)

    def redshift(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.dt_dtau is not None:
            gamma = np.asarray(self.dt_dtau(tau), dtype=float)
        else:
            h = self.step
            gamma = (np.asarray(self.t_of_tau(tau + h)) - np.asarray(self.t_of_tau(tau - h))) / (2 * h)
        if np.any(~np.isfinite(gamma)) or np.any(gamma <= 0):
            raise ConfigurationError("custom trajectory must have t strictly increasing in tau")
        return gamma

    @property
    def stationary(self) -> bool:
        return False


Trajectory = Union[Inertial, UniformAcceleration, CustomTrajectory]


# ---------------------------------------------------------------------------
# switching


@dataclass(frozen=True)
class SharpSwitching:
    """Coupling that turns on abruptly at tau = 0 with strength ``coupling``."""

    coupling: float

    def __post_init__(self):
        if not (self.coupling >= 0 and math.isfinite(self.coupling)):
            raise ConfigurationError("coupling strength must be non-negative")

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.where(tau >= 0.0, self.coupling, 0.0)

    @property
    def breakpoints(self) -> tuple:
        return (0.0,)


@dataclass(frozen=True)
class GaussianSwitching:
    """lambda(tau) = coupling * exp(-tau^2 / (2 width^2))."""

    coupling: float
    width: float

    def __post_init__(self):
        if not (self.coupling >= 0 and math.isfinite(self.coupling)):
            raise ConfigurationError("coupling strength must be non-negative")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ConfigurationError("Gaussian switching width must be positive")

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.coupling * np.exp(-0.5 * (tau / self.width) ** 2)

    @property
    def breakpoints(self) -> tuple:
        return ()


Switching = Union[SharpSwitching, GaussianSwitching]


# ---------------------------------------------------------------------------
# detectors and the coupled system


@dataclass(frozen=True)
class DetectorConfig:
    """One harmonic-oscillator detector.

    ``squeezing`` selects a squeezed-vacuum initial state (0 means ground
    state).  ``mode_weights`` optionally rescales the coupling to each field
    mode and defaults to 1 for every mode.
    """

    gap: float
    switching: Switching
    trajectory: Trajectory
    squeezing: float = 0.0
    mode_weights: Optional[tuple] = None

    def __post_init__(self):
        if not (self.gap > 0 and math.isfinite(self.gap)):
            raise ConfigurationError("detector gap must be positive and finite")
        if self.mode_weights is not None:
            object.__setattr__(self, "mode_weights", tuple(float(v) for v in self.mode_weights))

    def initial_covariance(self) -> np.ndarray:
        return squeezed_vacuum(self.squeezing)


@dataclass(frozen=True)
class CouplingMatrices:
    w: np.ndarray
    g: np.ndarray


@dataclass(frozen=True)
class FMatrix:
    A: np.ndarray
    B: np.ndarray
    X: np.ndarray
    F: np.ndarray
    F_sym: np.ndarray


def f_matrix(c: CouplingMatrices, tol: float = 1e-12) -> FMatrix:
    """Assemble F = [[A, X], [X^dag, B]] and F_sym = F + F^T.

    Raises if ``w`` is not Hermitian, ``g`` not symmetric, or F_sym comes out
    with an imaginary part above ``tol``.
    """
    w, g = np.asarray(c.w), np.asarray(c.g)
    scale = max(1.0, float(np.max(np.abs(w))), float(np.max(np.abs(g))))
    if np.max(np.abs(w - w.conj().T)) > tol * scale:
        raise ConfigurationError("w must be Hermitian")
    if np.max(np.abs(g - g.T)) > tol * scale:
        raise ConfigurationError("g must be symmetric")
    gh = g.conj().T
    A = 0.5 * (w + g + gh)
    B = 0.5 * (w - g - gh)
    X = 0.5j * (w - g + gh)
    F = np.block([[A, X], [X.conj().T, B]])
    fs = F + F.T
    if np.max(np.abs(fs.imag)) > tol * scale:
        raise ConfigurationError("F_sym has a non-negligible imaginary part")
    return FMatrix(A, B, X, F, np.ascontiguousarray(fs.real))


def fsym_from_couplings(w: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Closed form of F_sym for Hermitian w and symmetric g."""
    rw, iw, rg, ig = w.real, w.imag, g.real, g.imag
    return np.block([[rw + 2 * rg, -iw + 2 * ig], [iw + 2 * ig, rw - 2 * rg]])


@dataclass(frozen=True)
class DetectorSystem:
    """Detectors coupled to one truncated cavity field.

    In the interaction picture the Hamiltonian only contains the couplings,
    which carry the phases exp(i Omega tau) and exp(-i omega_n t(tau)).  In the
    full picture the free terms Omega_d and (dt/dtau) omega_n sit on the
    diagonal and the couplings only involve the spatial mode profiles, so a
    stationary, sharply switched system has a constant generator.
    """

    detectors: tuple
    cavity: CavityConfig
    picture: Picture = Picture.INTERACTION
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "picture", Picture(self.picture))
        if not self.detectors:
            raise ConfigurationError("at least one detector is required")
        for d in self.detectors:
            if d.mode_weights is not None and len(d.mode_weights) != self.cavity.n_modes:
                raise ConfigurationError("mode_weights length does not match the number of modes")
        if len(self.detectors) > 1:
            trajs = [d.trajectory for d in self.detectors]
            all_inertial = all(isinstance(t, Inertial) for t in trajs)
            all_same = all(t == trajs[0] for t in trajs)
            if not (all_inertial or all_same):
                raise ConfigurationError(
                    "detectors on distinct non-inertial trajectories do not share a proper time"
                )

    @property
    def n_detectors(self) -> int:
        return len(self.detectors)

    @property
    def n_modes(self) -> int:
        return self.cavity.n_modes

    @property
    def n_total(self) -> int:
        return self.n_detectors + self.n_modes

    @property
    def stationary(self) -> bool:
        return all(d.trajectory.stationary for d in self.detectors)

    def breakpoints(self) -> tuple:
        pts = set()
        for d in self.detectors:
            pts.update(d.switching.breakpoints)
        return tuple(sorted(pts))

    def max_frequency(self) -> float:
        """Largest rest-frame frequency in the problem (detector gaps and field modes)."""
        om = max(d.gap for d in self.detectors)
        om_field = float(np.max(self.cavity.frequencies()))
        if self.picture is Picture.INTERACTION:
            return om + om_field
        return max(om, om_field)

    def initial_covariance(self) -> np.ndarray:
        k = self.n_total
        sigma = np.eye(2 * k)
        for i, d in enumerate(self.detectors):
            s0 = d.initial_covariance()
            idx = [i, i + k]
            sigma[np.ix_(idx, idx)] = s0
        return sigma

    def _weights(self) -> np.ndarray:
        if "weights" not in self._cache:
            n = self.n_modes
            self._cache["weights"] = np.array(
                [np.ones(n) if d.mode_weights is None else np.asarray(d.mode_weights) for d in self.detectors]
            )
        return self._cache["weights"]

    def detector_couplings(self, tau: float):
        """Return (diag, w_dn, g_dn) at proper time ``tau``.

        ``diag`` holds the real diagonal of w (length M + N); ``w_dn`` and
        ``g_dn`` are the M x N detector-to-mode blocks.  All other entries of
        w and g vanish apart from ``w_nd = conj(w_dn)`` and ``g_nd = g_dn``.
        """
        m, n = self.n_detectors, self.n_modes
        lam = self._weights()
        w_dn = np.empty((m, n), dtype=complex)
        g_dn = np.empty((m, n), dtype=complex)
        diag = np.zeros(m + n)
        om_field = self.cavity.frequencies()
        for i, d in enumerate(self.detectors):
            coup = float(d.switching(tau))
            t, x = d.trajectory.evaluate(tau)
            v = self.cavity.spatial_profile(x)
            if self.picture is Picture.INTERACTION:
                phase = np.exp(1j * (d.gap * tau - om_field * t))
                w_dn[i] = coup * lam[i] * phase * v
                g_dn[i] = 0.5 * coup * lam[i] * np.exp(1j * d.gap * tau) * np.conj(np.exp(-1j * om_field * t) * v)
            else:
                w_dn[i] = coup * lam[i] * v
                g_dn[i] = 0.5 * coup * lam[i] * np.conj(v)
                diag[i] = d.gap
        if self.picture is Picture.FULL:
            gamma = float(self.detectors[0].trajectory.redshift(tau))
            diag[m:] = gamma * om_field
        return diag, w_dn, g_dn

    def couplings(self, tau: float) -> CouplingMatrices:
        """Dense (w, g) matrices at proper time ``tau``."""
        m, k = self.n_detectors, self.n_total
        diag, w_dn, g_dn = self.detector_couplings(tau)
        w = np.diag(diag).astype(complex)
        g = np.zeros((k, k), dtype=complex)
        w[:m, m:] = w_dn
        w[m:, :m] = w_dn.conj().T
        g[:m, m:] = g_dn
        g[m:, :m] = g_dn.T
        return CouplingMatrices(w, g)

    def fsym(self, tau: float) -> np.ndarray:
        c = self.couplings(tau)
        return fsym_from_couplings(c.w, c.g)

    def generator_rows(self, tau: float):
        """Sparse description of F_sym for structured products.

        Returns ``(diag, idx, rows)`` with F_sym = diag(diag) + E where E is
        non-zero only in rows and columns ``idx`` (the detector quadratures)
        and ``rows = E[idx, :]``.
        """
        m, k = self.n_detectors, self.n_total
        diag, w_dn, g_dn = self.detector_couplings(tau)
        rows = np.zeros((2 * m, 2 * k))
        # q_d rows: [Re w + 2 Re g | -Im w + 2 Im g]
        rows[:m, m:k] = w_dn.real + 2 * g_dn.real
        rows[:m, k + m:] = -w_dn.imag + 2 * g_dn.imag
        # p_d rows: [Im w + 2 Im g | Re w - 2 Re g]
        rows[m:, m:k] = w_dn.imag + 2 * g_dn.imag
        rows[m:, k + m:] = w_dn.real - 2 * g_dn.real
        idx = np.concatenate([np.arange(m), k + np.arange(m)])
        return np.concatenate([diag, diag]), idx, rows

    def omega(self) -> np.ndarray:
        return symplectic_form(self.n_total)


def mode_frequency(n: int, cavity: CavityConfig) -> float:
    """omega_n = |n pi / L| (Dirichlet) or |2 n pi / L| (periodic)."""
    n = int(n)
    if cavity.boundary is Boundary.DIRICHLET:
        if n <= 0:
            raise ConfigurationError("Dirichlet mode index must be >= 1")
        return abs(n * math.pi / cavity.length)
    return abs(2 * n * math.pi / cavity.length)


def mode_function(n: int, x, t, cavity: CavityConfig):
    """u_n(t, x) for a single integer label n (unnormalised unless the cavity says otherwise)."""
    om = mode_frequency(n, cavity)
    if cavity.boundary is Boundary.DIRICHLET:
        v = np.sin(n * math.pi / cavity.length * np.asarray(x, dtype=float)).astype(complex)
        norm = 1.0 / math.sqrt(om * cavity.length) if cavity.normalize else 1.0
    else:
        v = np.exp(2j * n * math.pi / cavity.length * np.asarray(x, dtype=float))
        norm = 1.0 / math.sqrt(2 * om * cavity.length) if cavity.normalize and n != 0 else 1.0
    return norm * np.exp(-1j * om * np.asarray(t, dtype=float)) * v


def worldline_eval(trajectory: Trajectory, tau):
    """(t, x) of the trajectory at proper time tau."""
    return trajectory.evaluate(tau)


def redshift(trajectory: Trajectory, tau):
    """dt/dtau along the trajectory."""
    return trajectory.redshift(tau)


def coupling_matrices(tau: float, detectors, cavity: CavityConfig, picture=Picture.INTERACTION) -> CouplingMatrices:
    """Dense (w, g) at proper time tau for the given detectors and cavity."""
    return DetectorSystem(tuple(detectors), cavity, Picture(picture)).couplings(tau)


def single_detector(
    gap: float,
    switching: Switching,
    trajectory: Trajectory,
    cavity: CavityConfig,
    picture: Picture = Picture.INTERACTION,
    squeezing: float = 0.0,
) -> DetectorSystem:
    return DetectorSystem((DetectorConfig(gap, switching, trajectory, squeezing),), cavity, picture)
