import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goedge import gib
from goedge.errors import EmptyGridError, IllConditionedSourceError

import oracles

S1 = gib.GaussianSource.scalar(1.0, 1.0, 0.8)
DIAG = gib.GaussianSource(np.eye(2), np.eye(2), np.diag([0.9, 0.3]))


def random_source(rng, dx, dy):
    m = rng.standard_normal((dx + dy, dx + dy + 2))
    joint = m @ m.T / (dx + dy + 2) + 0.05 * np.eye(dx + dy)
    return gib.GaussianSource(joint[:dx, :dx], joint[dx:, dx:], joint[:dx, dx:])


# --- GaussianSource -----------------------------------------------------------

def test_source_rejects_asymmetric_cov():
    with pytest.raises(ValueError, match="symmetric"):
        gib.GaussianSource([[1.0, 0.1], [0.0, 1.0]], [[1.0]], [[0.1], [0.1]])


def test_source_rejects_non_psd_joint():
    with pytest.raises(ValueError, match="semidefinite"):
        gib.GaussianSource.scalar(1.0, 1.0, 1.5)


def test_synthetic_source_is_reproducible():
    a = gib.GaussianSource.synthetic(6, 3, seed=4)
    b = gib.GaussianSource.synthetic(6, 3, seed=4)
    assert np.array_equal(a.joint_cov, b.joint_cov)
    assert (a.dim_x, a.dim_y, a.d_min) == (6, 3, 3)


# --- conditional_covariance -------------------------------------------------------

def test_conditional_covariance_independent():
    src = gib.GaussianSource(np.eye(2), np.eye(2), np.zeros((2, 2)))
    assert np.allclose(gib.conditional_covariance(src), np.eye(2), atol=0)


def test_conditional_covariance_scalar():
    assert gib.conditional_covariance(S1)[0, 0] == pytest.approx(1 - 0.64, abs=1e-14)


def test_conditional_covariance_fully_predictable():
    c = np.array([[2.0, 0.5], [0.5, 1.0]])
    src = gib.GaussianSource(c, c, c)
    assert np.allclose(gib.conditional_covariance(src), 0.0, atol=1e-12)


def test_conditional_covariance_ill_conditioned():
    cy = np.diag([1e3, 2e-10])
    src = gib.GaussianSource(np.eye(2), cy, np.zeros((2, 2)))
    with pytest.raises(IllConditionedSourceError):
        gib.conditional_covariance(src)


# --- spectrum and critical betas ----------------------------------------------------

def test_spectrum_scalar():
    sp = gib.compute_spectrum(S1)
    assert sp.eigenvalues[0] == pytest.approx(oracles.scalar_lambda(1, 1, 0.8), abs=1e-12)
    assert abs(sp.left_eigenvectors[0, 0]) == pytest.approx(1.0)
    assert sp.r[0] == pytest.approx(1.0)
    assert sp.critical_betas[0] == pytest.approx(1.5625, abs=1e-10)


def test_spectrum_uninformative():
    src = gib.GaussianSource(np.eye(2), np.eye(2), np.zeros((2, 2)))
    sp = gib.compute_spectrum(src)
    assert np.allclose(sp.eigenvalues, 1.0)
    assert np.all(np.isinf(sp.critical_betas))


def test_spectrum_diagonal():
    sp = gib.compute_spectrum(DIAG)
    assert np.allclose(sp.eigenvalues, [1 - 0.81, 1 - 0.09], atol=1e-12)
    assert np.allclose(sp.critical_betas, [1 / 0.81, 1 / 0.09], atol=1e-9)


@pytest.mark.parametrize("lam, expected", [(0.36, 1.5625), (0.0, 1.0), (1.0, np.inf)])
def test_critical_betas(lam, expected):
    assert gib.critical_betas([lam])[0] == pytest.approx(expected)


def test_spectrum_left_eigen_relation_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        src = random_source(rng, int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        sp = gib.compute_spectrum(src)
        mat = gib.conditional_covariance(src) @ np.linalg.inv(src.cov_x)
        lhs = sp.left_eigenvectors @ mat
        rhs = sp.eigenvalues[:, None] * sp.left_eigenvectors
        scale = np.abs(sp.left_eigenvectors).max() * max(1.0, np.abs(mat).max())
        assert np.abs(lhs - rhs).max() <= 1e-8 * scale
        assert np.all(np.diff(sp.eigenvalues) >= 0)
        assert np.all((sp.eigenvalues >= 0) & (sp.eigenvalues <= 1))
        assert np.all(sp.critical_betas >= 1)


# --- beta grid ------------------------------------------------------------------------

def test_beta_grid_single_component():
    assert gib.beta_grid(gib.compute_spectrum(S1)) == pytest.approx([15.625])


def test_beta_grid_two_components():
    assert gib.beta_grid(gib.compute_spectrum(DIAG)) == pytest.approx([1 / 0.09, 10 / 0.09])


def test_beta_grid_empty():
    src = gib.GaussianSource(np.eye(2), np.eye(2), np.zeros((2, 2)))
    with pytest.raises(EmptyGridError):
        gib.beta_grid(gib.compute_spectrum(src))


def test_beta_grid_capped_at_d_min():
    src = gib.GaussianSource.synthetic(10, 3, seed=1)
    sp = gib.compute_spectrum(src)
    assert len(gib.beta_grid(sp)) == 3


# --- projection ------------------------------------------------------------------------

def test_projection_below_first_critical():
    p = gib.projection(gib.compute_spectrum(S1), S1, 1.0)
    assert p.n_beta == 0 and np.all(p.matrix_a == 0)


def test_projection_scalar_alpha():
    p = gib.projection(gib.compute_spectrum(S1), S1, 4.0)
    alpha = oracles.scalar_gib(1, 1, 0.8, 4.0)[4]
    assert abs(p.matrix_a[0, 0]) == pytest.approx(alpha, abs=1e-12)
    assert alpha == pytest.approx(2.08167, abs=1e-5)


def test_projection_diagonal_partial():
    p = gib.projection(gib.compute_spectrum(DIAG), DIAG, 5.0)
    assert p.n_beta == 1
    assert np.count_nonzero(np.any(p.matrix_a != 0, axis=1)) == 1
    assert np.array_equal(p.noise_cov, np.eye(2))


# --- mutual informations, NMSE, entropy --------------------------------------------------

def test_mutual_informations_scalar():
    i_xz, i_zy = gib.mutual_informations(gib.compute_spectrum(S1), 4.0)
    o = oracles.scalar_gib(1, 1, 0.8, 4.0)
    assert i_xz == pytest.approx(o[0], abs=1e-12)
    assert i_zy == pytest.approx(o[1], abs=1e-12)
    assert (i_xz, i_zy) == pytest.approx((1.2075, 0.52940), abs=1e-4)


def test_mutual_informations_inactive():
    assert gib.mutual_informations(gib.compute_spectrum(S1), 1.5) == (0.0, 0.0)


def test_mutual_informations_continuous_at_critical():
    i_xz, i_zy = gib.mutual_informations(gib.compute_spectrum(S1), 1.5625 + 1e-9)
    assert 0 <= i_zy <= i_xz < 1e-7


def test_decoder_inactive():
    p = gib.projection(gib.compute_spectrum(S1), S1, 1.0)
    m, nmse = gib.decoder_and_nmse(S1, p)
    assert nmse == 1.0 and np.all(m == 0)


def test_decoder_scalar():
    p = gib.projection(gib.compute_spectrum(S1), S1, 4.0)
    m, nmse = gib.decoder_and_nmse(S1, p)
    o = oracles.scalar_gib(1, 1, 0.8, 4.0)
    assert nmse == pytest.approx(o[2], abs=1e-12)
    assert nmse == pytest.approx(0.48, abs=1e-12)
    assert abs(m[0, 0]) == pytest.approx(0.31225, abs=1e-5)


def test_nmse_decreases_at_grid_point():
    sp = gib.compute_spectrum(S1)
    nmse = gib.decoder_and_nmse(S1, gib.projection(sp, S1, 15.625))[1]
    assert nmse == pytest.approx(oracles.scalar_gib(1, 1, 0.8, 15.625)[2], abs=1e-12)
    assert nmse < 0.48


def test_entropy_scalar():
    p = gib.projection(gib.compute_spectrum(S1), S1, 4.0)
    assert gib.z_entropy_bits(S1, p) == pytest.approx(3.2547, abs=1e-4)
    assert gib.z_entropy_bits(S1, p) == pytest.approx(oracles.scalar_gib(1, 1, 0.8, 4.0)[3])


def test_entropy_inactive_and_floor():
    sp = gib.compute_spectrum(S1)
    assert gib.z_entropy_bits(S1, gib.projection(sp, S1, 1.0)) == 0.0
    # unit encoder noise keeps det(Sigma_Z) >= 1; a hand-built projection
    # with tiny noise reaches the one-bit floor
    tiny = gib.GibProjection(beta=2.0, n_beta=1, matrix_a=np.array([[1e-4]]),
                             alphas=np.array([1e-4]), noise_cov=np.array([[1e-6]]))
    assert gib.z_entropy_bits(S1, tiny) == 1.0


# --- properties ---------------------------------------------------------------------------

def test_data_processing_bound_random_sources():
    rng = np.random.default_rng(1)
    for _ in range(200):
        src = random_source(rng, int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        ixy = oracles.mutual_information_xy(src.cov_x, src.cov_y, src.cov_xy)
        sp = gib.compute_spectrum(src)
        for beta in np.geomspace(1.0, 1e4, 50):
            assert gib.mutual_informations(sp, beta)[1] <= ixy + 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 6))
def test_frontier_monotone(seed, dx, dy):
    src = random_source(np.random.default_rng(seed), dx, dy)
    pts = gib.frontier(src, np.geomspace(1.0, 1e4, 60))
    i_xz = np.array([p.i_xz_bits for p in pts])
    i_zy = np.array([p.i_zy_bits for p in pts])
    nmse = np.array([p.nmse for p in pts])
    assert np.all(np.diff(i_xz) >= -1e-9)
    assert np.all(np.diff(i_zy) >= -1e-9)
    assert np.all(np.diff(nmse) <= 1e-9)
    assert np.all(i_zy <= i_xz + 1e-12)
    assert np.all((nmse >= 0) & (nmse <= 1 + 1e-9))


def test_normal_equations_random():
    rng = np.random.default_rng(2)
    for _ in range(50):
        src = random_source(rng, int(rng.integers(1, 7)), int(rng.integers(1, 7)))
        sp = gib.compute_spectrum(src)
        beta = 2.0 * sp.critical_betas[np.isfinite(sp.critical_betas)].max(initial=2.0)
        p = gib.projection(sp, src, beta)
        if p.n_beta == 0:
            continue
        m, _ = gib.decoder_and_nmse(src, p)
        a = p.matrix_a
        cz = a @ src.cov_x @ a.T + np.eye(a.shape[0])
        cyz = src.cov_xy.T @ a.T
        assert np.abs(m @ cz - cyz).max() <= 1e-9 * max(1.0, np.abs(cyz).max())


def test_projection_optimal_against_scalar_encoders():
    # a scalar encoder z = g x + noise is fixed by g; among grid encoders
    # whose I(x;z) matches the frontier rate, none beats the frontier NMSE
    for var_x, var_y, cov, beta in [(1, 1, 0.8, 4.0), (2.0, 0.5, 0.7, 9.0), (1, 3, 1.2, 2.5)]:
        src = gib.GaussianSource.scalar(var_x, var_y, cov)
        sp = gib.compute_spectrum(src)
        p = gib.projection(sp, src, beta)
        nmse = gib.decoder_and_nmse(src, p)[1]
        i_xz = gib.mutual_informations(sp, beta)[0]
        gains = np.linspace(1e-3, 2.0 * abs(p.alphas[0]), 1000)
        rates = 0.5 * np.log2(1 + gains**2 * var_x)
        ok = np.abs(rates - i_xz) <= 1e-3
        nmse_grid = 1 - (gains * cov) ** 2 / ((gains**2 * var_x + 1) * var_y)
        assert ok.any()
        assert abs(nmse_grid[ok].min() - nmse) <= 1e-3
