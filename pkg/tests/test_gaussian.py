import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from udwcavity.gaussian import (
    UnphysicalStateError,
    evolve_covariance,
    excitation_probability,
    format_matrix,
    from_mode_pairs,
    ground_probability,
    log_negativity,
    nu_minus_one,
    parse_matrix,
    purity,
    reduce_state,
    squeezed_vacuum,
    symplectic_eigenvalues,
    symplectic_form,
    temperature,
    thermal_spectrum,
    thermality_gap,
    to_mode_pairs,
)


def two_mode_squeezed(s):
    """Two-mode squeezed vacuum in qq..pp ordering."""
    c, sh = np.cosh(2 * s), np.sinh(2 * s)
    blocks = np.block([[c * np.eye(2), sh * np.diag([1, -1])], [sh * np.diag([1, -1]), c * np.eye(2)]])
    return from_mode_pairs(blocks)


def random_symplectic(rng, k, scale=0.5):
    h = rng.normal(size=(2 * k, 2 * k)) * scale
    return expm(symplectic_form(k) @ (h + h.T))


def rotation(theta):
    return np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])


# --- symplectic form ---------------------------------------------------------


def test_symplectic_form_single_mode():
    assert np.array_equal(symplectic_form(1), [[0, 1], [-1, 0]])


def test_symplectic_form_blocks():
    om = symplectic_form(2)
    assert np.array_equal(om[:2, 2:], np.eye(2))
    assert np.array_equal(om[2:, :2], -np.eye(2))
    assert not om[:2, :2].any() and not om[2:, 2:].any()


@pytest.mark.parametrize("k", [1, 2, 5])
def test_symplectic_form_squares_to_minus_identity(k):
    om = symplectic_form(k)
    assert np.array_equal(om @ om, -np.eye(2 * k))
    assert np.array_equal(om.T, -om)


def test_symplectic_form_rejects_zero():
    with pytest.raises(ValueError):
        symplectic_form(0)


# --- symplectic eigenvalues ---------------------------------------------------


def test_vacuum_eigenvalues():
    assert np.allclose(symplectic_eigenvalues(np.eye(4)), [1, 1])


def test_thermal_eigenvalue():
    assert np.allclose(symplectic_eigenvalues(3 * np.eye(2)), [3])


def test_eigenvalues_sorted_descending():
    sigma = np.diag([2.0, 5.0, 2.0, 5.0])
    assert np.allclose(symplectic_eigenvalues(sigma), [5, 2])


def test_eigenvalues_reject_asymmetric():
    with pytest.raises(UnphysicalStateError):
        symplectic_eigenvalues(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_eigenvalues_reject_uncertainty_violation():
    with pytest.raises(UnphysicalStateError):
        symplectic_eigenvalues(0.5 * np.eye(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_congruence_preserves_symplectic_spectrum(k, seed):
    rng = np.random.default_rng(seed)
    nus = 1 + rng.exponential(size=k)
    sigma = np.diag(np.concatenate([nus, nus]))
    S = random_symplectic(rng, k)
    out = symplectic_eigenvalues(evolve_covariance(S, sigma))
    assert np.allclose(out, np.sort(nus)[::-1], rtol=1e-9, atol=1e-9)


# --- purity -------------------------------------------------------------------


def test_purity_vacuum_and_thermal():
    assert purity(np.eye(4)) == pytest.approx(1.0)
    assert purity(3 * np.eye(2)) == pytest.approx(1 / 3)


def test_purity_rejects_subvacuum():
    with pytest.raises(UnphysicalStateError):
        purity(0.9 * np.eye(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000), st.booleans())
def test_purity_one_iff_all_eigenvalues_one(k, seed, mixed):
    rng = np.random.default_rng(seed)
    nus = np.ones(k)
    if mixed:
        nus[rng.integers(k)] += 0.1 + rng.exponential()
    sigma = evolve_covariance(random_symplectic(rng, k), np.diag(np.concatenate([nus, nus])))
    pure = np.allclose(symplectic_eigenvalues(sigma), 1.0, atol=1e-8)
    assert pure == (not mixed)
    assert (abs(purity(sigma) - 1.0) < 1e-8) == pure


# --- occupation probabilities -------------------------------------------------


def test_ground_probability_vacuum():
    assert ground_probability(np.eye(2)) == pytest.approx(1.0)


def test_ground_probability_thermal_value():
    # 2/sqrt(9 + 6 + 1) = 1/2
    assert ground_probability(3 * np.eye(2)) == pytest.approx(0.5)


def test_ground_probability_squeezed():
    # det = 1, tr = 2 cosh 2r  ->  p0 = 2/sqrt(2 + 2 cosh 2r) = sech r
    r = 0.7
    assert ground_probability(squeezed_vacuum(r)) == pytest.approx(1 / np.cosh(r), rel=1e-13)


def test_ground_probability_needs_single_mode():
    with pytest.raises(ValueError):
        ground_probability(np.eye(4))


@pytest.mark.parametrize("nu", np.linspace(1.0, 20.0, 25))
def test_ground_probability_matches_thermal_p0(nu):
    assert ground_probability(nu * np.eye(2)) == pytest.approx(thermal_spectrum(nu, 0)[0], rel=1e-14)


def test_squeezed_r5_is_pure():
    assert np.allclose(symplectic_eigenvalues(squeezed_vacuum(5.0)), [1.0], atol=1e-9)


def _squeezed_p0_number_basis(r, n_max=60):
    # ground-state overlap of S(r)|0> expanded in the number basis, normalised by the truncated norm
    n = np.arange(0, n_max + 1, 2)
    from math import factorial
    amps = np.array([np.sqrt(float(factorial(k))) / (2 ** (k // 2) * float(factorial(k // 2))) for k in n])
    amps = amps * (-np.tanh(r)) ** (n // 2) / np.sqrt(np.cosh(r))
    return amps[0] ** 2, np.sum(amps ** 2)


def test_ground_probability_squeezed_e2_value():
    sigma = np.diag([np.e ** 2, np.e ** -2])
    p0_basis, norm = _squeezed_p0_number_basis(1.0)
    assert norm == pytest.approx(1.0, abs=1e-3)
    assert ground_probability(sigma) == pytest.approx(0.6481, abs=1e-4)
    assert ground_probability(sigma) == pytest.approx(p0_basis, rel=1e-12)


def test_thermal_spectrum_vacuum():
    assert np.array_equal(thermal_spectrum(1.0, 3), [1.0, 0.0, 0.0, 0.0])


def test_thermal_spectrum_values():
    p = thermal_spectrum(3.0, 3)
    assert np.allclose(p, [0.5, 0.25, 0.125, 0.0625])


@pytest.mark.parametrize("nu", [1.0, 1.5, 3.0, 11.0])
def test_thermal_spectrum_normalised(nu):
    ratio = (nu - 1) / (nu + 1)
    n_max = 0 if ratio == 0 else int(np.ceil(np.log(1e-13) / np.log(ratio))) + 1
    assert abs(thermal_spectrum(nu, n_max).sum() - 1.0) < 1e-10


def test_excitation_probability_matches_direct_formula():
    sigma = np.array([[1.3, 0.2], [0.2, 1.1]])
    assert excitation_probability(sigma) == pytest.approx(1 - ground_probability(sigma), rel=1e-12)


def test_excitation_probability_keeps_tiny_values():
    eps = 1e-13
    sigma = np.diag([1 + eps, 1 + eps])
    # 1 - p0 = 1 - 2/(2 + eps) ~ eps/2, invisible to the naive difference at this size
    assert excitation_probability(sigma) == pytest.approx(eps / 2, rel=1e-6)


# --- temperature and thermality -----------------------------------------------


def test_temperature_inverts_thermal_ratio():
    # p1/p0 = exp(-gap/T) for the thermal distribution
    nu, gap = 1.3, 4.0
    p = thermal_spectrum(nu, 1)
    assert temperature(nu, gap) == pytest.approx(-gap / np.log(p[1] / p[0]), rel=1e-12)


def test_temperature_zero_limit():
    assert temperature(1.0, 2.0) == 0.0
    assert temperature(0.999, 2.0) == 0.0
    assert temperature(1 + 1e-9, 4.0) < 0.25


def test_temperature_unit_value():
    nu = 1 + 2 / np.expm1(4.0)
    assert nu == pytest.approx(1.03732, abs=1e-5)
    assert temperature(nu, 4.0) == pytest.approx(1.0, rel=1e-13)


def test_temperature_direct_value():
    # 4.5/ln 3 = 4.0960765...
    assert temperature(2.0, 4.5) == pytest.approx(4.096077, abs=1e-6)
    assert temperature(2.0, 4.5) == pytest.approx(4.5 / np.log(3.0), rel=1e-14)


def test_thermality_gap_thermal_is_zero():
    d, p1 = thermality_gap(2.5 * np.eye(2))
    assert d == 0.0
    assert p1 == pytest.approx(thermal_spectrum(2.5, 1)[1])


def test_thermality_gap_pure_squeezed():
    d, p1 = thermality_gap(squeezed_vacuum(0.4))
    assert d > 0
    assert p1 == pytest.approx(0.0, abs=1e-15)
    assert d == pytest.approx(1 - 1 / np.cosh(0.4), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 3.0), st.floats(0.0, 1.0), st.floats(0, np.pi))
def test_thermality_gap_matches_direct_difference(excess, r, theta):
    nu = 1 + excess
    R = rotation(theta)
    sigma = R @ (nu * squeezed_vacuum(r)) @ R.T
    d, p1 = thermality_gap(sigma)
    direct = 2 / (nu + 1) - ground_probability(sigma)
    assert d == pytest.approx(direct, rel=1e-8, abs=1e-14)
    assert p1 == pytest.approx(thermal_spectrum(nu, 1)[1], rel=1e-9)


def test_nu_minus_one_small_excess():
    eps = 1e-12
    sigma = np.diag([1 + eps, 1 + eps])
    assert nu_minus_one(sigma) == pytest.approx(eps, rel=1e-6)


# --- logarithmic negativity ---------------------------------------------------


def test_log_negativity_vacuum():
    assert log_negativity(np.eye(4)) == 0.0


def test_log_negativity_two_mode_squeezed():
    assert log_negativity(two_mode_squeezed(0.5)) == pytest.approx(1.0, abs=1e-12)


def test_log_negativity_product_state():
    sigma = np.zeros((4, 4))
    sigma[np.ix_([0, 2], [0, 2])] = [[2.0, 0.3], [0.3, 1.0]]
    sigma[np.ix_([1, 3], [1, 3])] = 1.5 * np.eye(2)
    assert log_negativity(sigma) == 0.0


def test_log_negativity_matches_partial_transpose_spectrum():
    rng = np.random.default_rng(3)
    sigma = evolve_covariance(random_symplectic(rng, 2, 0.4), np.diag([1.2, 1.0, 1.2, 1.0]))
    pt = sigma.copy()
    # p_2 -> -p_2
    flip = np.diag([1, 1, 1, -1.0])
    pt = flip @ pt @ flip
    nus = np.abs(np.linalg.eigvals(1j * symplectic_form(2) @ pt))
    expected = max(0.0, -np.log(nus.min()))
    assert log_negativity(sigma) == pytest.approx(expected, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.5), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_log_negativity_local_rotation_invariance(s, t1, t2):
    sigma = two_mode_squeezed(s)
    R = np.zeros((4, 4))
    for i, t in enumerate((t1, t2)):
        rot = rotation(t)
        idx = [i, i + 2]
        R[np.ix_(idx, idx)] = rot
    assert log_negativity(evolve_covariance(R, sigma)) == pytest.approx(log_negativity(sigma), abs=1e-9)


def test_log_negativity_rejects_wrong_size():
    with pytest.raises(ValueError):
        log_negativity(np.eye(2))


def test_log_negativity_base_option():
    assert log_negativity(two_mode_squeezed(0.5), base=2) == pytest.approx(1 / np.log(2), rel=1e-12)


# --- reduction and evolution ---------------------------------------------------


def test_reduce_vacuum():
    assert np.array_equal(reduce_state(np.eye(8), [0]), np.eye(2))


def test_reduce_two_mode_squeezed_marginal():
    s = 0.3
    assert np.allclose(reduce_state(two_mode_squeezed(s), [1]), np.cosh(2 * s) * np.eye(2))


def test_reduce_all_modes_is_identity_operation():
    rng = np.random.default_rng(0)
    sigma = evolve_covariance(random_symplectic(rng, 3), np.eye(6))
    assert np.array_equal(reduce_state(sigma, [0, 1, 2]), sigma)


def test_reduce_rejects_bad_indices():
    with pytest.raises(IndexError):
        reduce_state(np.eye(4), [2])
    with pytest.raises(IndexError):
        reduce_state(np.eye(4), [0, 0])


def test_evolve_covariance_cases():
    sigma0 = squeezed_vacuum(0.2)
    assert np.array_equal(evolve_covariance(np.eye(2), sigma0), sigma0)
    rot = expm(0.7 * symplectic_form(1))
    assert np.allclose(evolve_covariance(rot, np.eye(2)), np.eye(2), atol=1e-15)
    s = 0.4
    assert np.allclose(evolve_covariance(np.diag([np.exp(s), np.exp(-s)]), np.eye(2)),
                       np.diag([np.exp(2 * s), np.exp(-2 * s)]))


def test_evolve_covariance_exactly_symmetric():
    rng = np.random.default_rng(5)
    sigma = evolve_covariance(random_symplectic(rng, 4, 0.8), np.eye(8))
    assert np.array_equal(sigma, sigma.T)


def test_mode_pair_reordering_round_trip():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(6, 6))
    assert np.array_equal(from_mode_pairs(to_mode_pairs(a)), a)


def test_matrix_text_round_trip():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(3, 4))
    assert np.array_equal(parse_matrix(format_matrix(a)), a)


def test_log_negativity_floor_hides_only_errors_below_it():
    r = 1e-7
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    sigma = np.array([[c, s, 0, 0], [s, c, 0, 0], [0, 0, c, -s], [0, 0, -s, c]])
    en = log_negativity(sigma)
    assert en == pytest.approx(2 * r, rel=1e-6)
    assert log_negativity(sigma, floor=1e-9) == en
    assert log_negativity(sigma, floor=1e-6) == 0.0
