"""Gaussian-state primitives on covariance matrices.

All covariance matrices use the ``qq..pp`` quadrature ordering: for K modes the
phase-space vector is ``(q_1, .., q_K, p_1, .., p_K)`` and the vacuum has
covariance equal to the identity.  Conversions to other orderings happen only
at the edges (see :func:`to_mode_pairs`).
"""

from __future__ import annotations

import numpy as np

# Base of the logarithm used by log_negativity.  Natural log throughout.
LOG_BASE = np.e

DEFAULT_TOL = 1e-9


class UnphysicalStateError(ValueError):
    """Raised when a matrix violates the uncertainty principle or is malformed."""


def symplectic_form(n_modes: int) -> np.ndarray:
    """Return Omega = [[0, I], [-I, 0]] for ``n_modes`` modes."""
    if n_modes < 1:
        raise ValueError("need at least one mode")
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


def _check_square_even(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] % 2:
        raise UnphysicalStateError(f"covariance must be 2K x 2K, got shape {sigma.shape}")
    if not np.all(np.isfinite(sigma)):
        raise UnphysicalStateError("covariance contains non-finite entries")
    return sigma


def _check_symmetric(sigma: np.ndarray, tol: float) -> None:
    scale = max(1.0, float(np.max(np.abs(sigma))))
    if np.max(np.abs(sigma - sigma.T)) > tol * scale:
        raise UnphysicalStateError("covariance is not symmetric")


def vacuum(n_modes: int) -> np.ndarray:
    return np.eye(2 * n_modes)


def squeezed_vacuum(r: float) -> np.ndarray:
    """Single-mode squeezed vacuum diag(e^{2r}, e^{-2r})."""
    return np.diag([np.exp(2.0 * r), np.exp(-2.0 * r)])


def thermal_state(nu: float) -> np.ndarray:
    return nu * np.eye(2)


def symplectic_eigenvalues(sigma: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Symplectic eigenvalues of ``sigma`` in descending order.

    They are the moduli of the eigenvalues of ``i Omega sigma``, which come in
    +/- pairs.  Raises if the pairing is broken by more than ``tol`` (relative)
    or if any eigenvalue falls below 1 - tol.
    """
    sigma = _check_square_even(sigma)
    _check_symmetric(sigma, tol)
    k = sigma.shape[0] // 2
    ev = np.linalg.eigvals(1j * symplectic_form(k) @ sigma)
    scale = max(1.0, float(np.max(np.abs(ev))))
    if np.max(np.abs(ev.imag)) > tol * scale:
        raise UnphysicalStateError("i*Omega*sigma has complex eigenvalues")
    ev = np.sort(ev.real)
    neg, pos = -ev[:k][::-1], ev[k:]
    if np.max(np.abs(neg - pos)) > tol * scale:
        raise UnphysicalStateError("symplectic spectrum is not +/- paired")
    nu = np.sort(0.5 * (neg + pos))[::-1]
    if nu[-1] < 1.0 - tol:
        raise UnphysicalStateError(f"symplectic eigenvalue {nu[-1]:.6g} < 1 violates uncertainty")
    return nu


def purity(sigma: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """Purity 1/sqrt(det sigma).  Rejects det sigma < 1 - tol."""
    sigma = _check_square_even(sigma)
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0 or logdet < np.log1p(-tol):
        raise UnphysicalStateError("det(sigma) < 1 violates uncertainty")
    return float(np.exp(-0.5 * logdet))


def ground_probability(sigma: np.ndarray) -> float:
    """Vacuum occupation 2/sqrt(det sigma + tr sigma + 1) of a single mode."""
    sigma = _check_square_even(sigma)
    if sigma.shape != (2, 2):
        raise ValueError("ground_probability needs a single-mode 2x2 covariance")
    det = float(np.linalg.det(sigma))
    return 2.0 / np.sqrt(det + np.trace(sigma) + 1.0)


def thermal_spectrum(nu: float, n_max: int) -> np.ndarray:
    """Occupation probabilities p_0..p_{n_max} of a thermal state with symplectic eigenvalue nu."""
    if nu < 1.0:
        raise UnphysicalStateError("thermal state needs nu >= 1")
    n = np.arange(n_max + 1)
    return 2.0 / (nu + 1.0) * ((nu - 1.0) / (nu + 1.0)) ** n


def temperature(nu: float, gap: float) -> float:
    """Temperature of a thermal state with symplectic eigenvalue nu at energy gap ``gap``.

    Returns 0 for nu <= 1, the zero-temperature limit.
    """
    if nu <= 1.0:
        return 0.0
    return gap / np.log1p(2.0 / (nu - 1.0))


def _nu_minus_one(sigma: np.ndarray) -> float:
    a, b, c = sigma[0, 0], sigma[1, 1], 0.5 * (sigma[0, 1] + sigma[1, 0])
    nu = np.sqrt(max(a * b - c * c, 0.0))
    # expanded around the vacuum so that small excitations keep their digits
    return ((a - 1.0) + (b - 1.0) + (a - 1.0) * (b - 1.0) - c * c) / (nu + 1.0)


def nu_minus_one(sigma: np.ndarray) -> float:
    """nu - 1 for a single-mode covariance, accurate when nu is close to 1."""
    sigma = _check_square_even(sigma)
    if sigma.shape != (2, 2):
        raise ValueError("nu_minus_one needs a 2x2 covariance")
    v = _nu_minus_one(sigma)
    if v < -DEFAULT_TOL:
        raise UnphysicalStateError("single-mode covariance violates uncertainty")
    return max(v, 0.0)


def excitation_probability(sigma: np.ndarray) -> float:
    """1 - p0 of a single mode, without cancellation for tiny excitations."""
    sigma = _check_square_even(sigma)
    if sigma.shape != (2, 2):
        raise ValueError("excitation_probability needs a 2x2 covariance")
    a, b, c = sigma[0, 0], sigma[1, 1], 0.5 * (sigma[0, 1] + sigma[1, 0])
    # det + tr + 1 - 4, expanded around the vacuum
    y2m4 = 2.0 * (a - 1.0) + 2.0 * (b - 1.0) + (a - 1.0) * (b - 1.0) - c * c
    y = np.sqrt(y2m4 + 4.0)
    return float(y2m4 / (y * (y + 2.0)))


def thermality_gap(sigma: np.ndarray) -> tuple[float, float]:
    """Return (p0_thermal - p0, p1_thermal) for a single-mode covariance.

    ``p0_thermal`` and ``p1_thermal`` belong to the thermal state with the same
    symplectic eigenvalue.  Both numbers are computed in cancellation-free form
    so they keep their digits when the excitation is tiny.  A Gaussian state
    never has more vacuum weight than its thermal counterpart, so the first
    entry is non-negative.
    """
    sigma = _check_square_even(sigma)
    if sigma.shape != (2, 2):
        raise ValueError("thermality_gap needs a 2x2 covariance")
    a, b, c = sigma[0, 0], sigma[1, 1], 0.5 * (sigma[0, 1] + sigma[1, 0])
    nm1 = _nu_minus_one(sigma)
    if nm1 < -DEFAULT_TOL:
        raise UnphysicalStateError("single-mode covariance violates uncertainty")
    nm1 = max(nm1, 0.0)
    nu = 1.0 + nm1
    x = nu + 1.0
    # (a - b)^2 + 4c^2 = tr^2 - 4 det, divided by tr + 2 nu
    delta = ((a - b) ** 2 + 4.0 * c * c) / (a + b + 2.0 * nu)
    y = np.sqrt(x * x + delta)
    gap = 2.0 * delta / (x * y * (x + y))
    p1 = 2.0 * nm1 / (x * x)
    return float(gap), float(p1)


def to_mode_pairs(sigma: np.ndarray) -> np.ndarray:
    """Reorder ``qq..pp`` into ``(q_1, p_1, q_2, p_2, ..)``."""
    sigma = _check_square_even(sigma)
    k = sigma.shape[0] // 2
    perm = np.ravel(np.column_stack([np.arange(k), np.arange(k) + k]))
    return sigma[np.ix_(perm, perm)]


def from_mode_pairs(sigma: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_mode_pairs`."""
    sigma = _check_square_even(sigma)
    k = sigma.shape[0] // 2
    perm = np.concatenate([np.arange(0, 2 * k, 2), np.arange(1, 2 * k, 2)])
    return sigma[np.ix_(perm, perm)]


def log_negativity(
    sigma: np.ndarray, base: float = LOG_BASE, tol: float = DEFAULT_TOL, floor: float = 0.0
) -> float:
    """Logarithmic negativity of a two-mode state given in ``qq..pp`` ordering.

    The smallest partially transposed symplectic eigenvalue is taken from the
    Hermitian matrix i L^T Omega L, where L L^T is the partial transpose.  Its
    spectrum is well conditioned even when the two partially transposed
    eigenvalues coincide, which is where the closed form in terms of local
    invariants loses half its digits.  The local-invariant discriminant is
    still used as the physicality check.

    ``floor`` is the known absolute error of ``sigma``, for example the
    symplectic drift of the matrix that produced it; 1 - nu_minus at or below
    it is reported as no entanglement.
    """
    sigma = _check_square_even(sigma)
    if sigma.shape != (4, 4):
        raise ValueError("log_negativity needs a two-mode 4x4 covariance")
    _check_symmetric(sigma, tol)
    blocks = to_mode_pairs(sigma)
    d1 = np.linalg.det(blocks[:2, :2])
    d2 = np.linalg.det(blocks[2:, 2:])
    d12 = np.linalg.det(blocks[:2, 2:])
    det = np.linalg.det(blocks)
    if det < 1.0 - tol:
        raise UnphysicalStateError("two-mode covariance violates uncertainty")
    tilde = d1 + d2 - 2.0 * d12
    disc = tilde * tilde - 4.0 * det
    if disc < -tol * max(1.0, tilde * tilde):
        raise UnphysicalStateError("negative discriminant in partial-transpose spectrum")
    # partial transpose: p of the second mode flips sign
    flip = np.array([1.0, 1.0, 1.0, -1.0])
    pt = 0.5 * (sigma + sigma.T) * np.outer(flip, flip)
    try:
        chol = np.linalg.cholesky(pt)
    except np.linalg.LinAlgError:
        raise UnphysicalStateError("partially transposed covariance is not positive definite") from None
    herm = 1j * (chol.T @ symplectic_form(2) @ chol)
    nu_minus = float(np.min(np.abs(np.linalg.eigvalsh(herm))))
    # values within rounding or the stated error of 1 carry no entanglement
    if 1.0 - nu_minus <= max(16 * np.finfo(float).eps * np.linalg.norm(sigma, 2), floor):
        return 0.0
    return float(-np.log(nu_minus) / np.log(base))


def reduce_state(sigma: np.ndarray, modes) -> np.ndarray:
    """Covariance of the subsystem ``modes`` (indices into 0..K-1), in ``qq..pp`` order."""
    sigma = _check_square_even(sigma)
    k = sigma.shape[0] // 2
    modes = np.atleast_1d(np.asarray(modes, dtype=int))
    if modes.size == 0 or np.any(modes < 0) or np.any(modes >= k):
        raise IndexError(f"mode indices {modes.tolist()} out of range for {k} modes")
    if len(set(modes.tolist())) != modes.size:
        raise IndexError("duplicate mode indices")
    idx = np.concatenate([modes, modes + k])
    return sigma[np.ix_(idx, idx)]


def evolve_covariance(S: np.ndarray, sigma0: np.ndarray) -> np.ndarray:
    """sigma = S sigma0 S^T, symmetrised to remove roundoff asymmetry."""
    sigma = S @ sigma0 @ S.T
    return 0.5 * (sigma + sigma.T)


def format_matrix(m: np.ndarray) -> str:
    """Row-major text, one row per line, 17 significant digits."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in m)


def parse_matrix(text: str) -> np.ndarray:
    rows = [line.split() for line in text.strip().splitlines() if line.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("ragged or empty matrix text")
    return np.array([[float(v) for v in r] for r in rows])
