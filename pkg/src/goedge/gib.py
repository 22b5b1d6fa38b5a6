"""Closed-form Gaussian Information Bottleneck.

For jointly Gaussian ``(x, y)`` the optimal bottleneck encoder is a noisy
linear projection ``z = A x + xi``.  Its rows are scaled left eigenvectors
of ``Sigma_{X|Y} Sigma_X^{-1}``; a component switches on once the
trade-off parameter ``beta`` exceeds its critical value ``1 / (1 - lambda)``.

Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from .errors import EmptyGridError, IllConditionedSourceError, NumericalError

SYM_RTOL = 1e-10
MIN_EIG = 1e-10
JOINT_PSD_ATOL = 1e-8
COND_MAX = 1e12
LAMBDA_BAND = 1e-8
UNINFORMATIVE_TOL = 1e-10
# alpha and I(x;z) divide by lambda; exactly predictable components are floored
LAMBDA_FLOOR = 1e-12
LOG2_2PIE = np.log2(2.0 * np.pi * np.e)


def _frozen(a) -> NDArray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GaussianSource:
    """Zero-mean jointly Gaussian pair ``(x, y)`` defining one inference task.

    Parameters
    ----------
    cov_x : array_like, shape (d_x, d_x)
    cov_y : array_like, shape (d_y, d_y)
    cov_xy : array_like, shape (d_x, d_y)
        Cross-covariance ``E[x y^T]``.

    Scalars are promoted to 1x1 matrices.
    """

    cov_x: NDArray
    cov_y: NDArray
    cov_xy: NDArray

    def __post_init__(self):
        cx, cy, cxy = _frozen(self.cov_x), _frozen(self.cov_y), _frozen(self.cov_xy)
        object.__setattr__(self, "cov_x", cx)
        object.__setattr__(self, "cov_y", cy)
        object.__setattr__(self, "cov_xy", cxy)
        for name, c in (("cov_x", cx), ("cov_y", cy)):
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise ValueError(f"{name} must be square, got shape {c.shape}")
            scale = max(np.abs(c).max(), np.finfo(float).tiny)
            if np.abs(c - c.T).max() > SYM_RTOL * scale:
                raise ValueError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(c)[0] <= MIN_EIG:
                raise ValueError(f"{name} is not positive definite")
        if cxy.shape != (cx.shape[0], cy.shape[0]):
            raise ValueError(
                f"cov_xy must have shape {(cx.shape[0], cy.shape[0])}, got {cxy.shape}"
            )
        if np.linalg.eigvalsh(self.joint_cov)[0] < -JOINT_PSD_ATOL:
            raise ValueError("joint covariance is not positive semidefinite")

    @property
    def dim_x(self) -> int:
        return self.cov_x.shape[0]

    @property
    def dim_y(self) -> int:
        return self.cov_y.shape[0]

    @property
    def d_min(self) -> int:
        return min(self.dim_x, self.dim_y)

    @property
    def joint_cov(self) -> NDArray:
        return np.block([[self.cov_x, self.cov_xy], [self.cov_xy.T, self.cov_y]])

    @classmethod
    def scalar(cls, var_x: float, var_y: float, cov: float) -> "GaussianSource":
        return cls([[var_x]], [[var_y]], [[cov]])

    @classmethod
    def synthetic(
        cls, dim_x: int, dim_y: int, seed: int, correlation: float = 0.8
    ) -> "GaussianSource":
        """Random source ``y = C x + n``.

        ``correlation`` in (0, 1) is the fraction of ``tr(Sigma_Y)`` explained
        by ``x``; the observation noise is white.
        """
        if not 0.0 < correlation < 1.0:
            raise ValueError("correlation must lie in (0, 1)")
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((dim_x, dim_x))
        cov_x = g @ g.T / dim_x + 0.1 * np.eye(dim_x)
        c = rng.standard_normal((dim_y, dim_x)) / np.sqrt(dim_x)
        signal = c @ cov_x @ c.T
        noise_var = np.trace(signal) * (1.0 - correlation) / (correlation * dim_y)
        cov_y = signal + noise_var * np.eye(dim_y)
        cov_y = 0.5 * (cov_y + cov_y.T)
        return cls(cov_x, cov_y, cov_x @ c.T)


@dataclass(frozen=True)
class GibSpectrum:
    """Eigen-structure of ``Sigma_{X|Y} Sigma_X^{-1}``, ascending in lambda.

    ``left_eigenvectors[i]`` is the row ``v_i``; ``r[i] = v_i^T Sigma_X v_i``.
    """

    eigenvalues: NDArray
    left_eigenvectors: NDArray
    r: NDArray
    critical_betas: NDArray
    d_min: int

    @property
    def n_usable(self) -> int:
        """Informative components, capped at ``d_min``."""
        n = int(np.count_nonzero(self.eigenvalues < 1.0 - UNINFORMATIVE_TOL))
        return min(n, self.d_min)


@dataclass(frozen=True)
class GibProjection:
    beta: float
    n_beta: int
    matrix_a: NDArray
    alphas: NDArray
    noise_cov: NDArray = field(repr=False)


@dataclass(frozen=True)
class GibRatePoint:
    beta: float
    n_beta: int
    i_xz_bits: float
    i_zy_bits: float
    nmse: float
    entropy_bits: float


def conditional_covariance(source: GaussianSource) -> NDArray:
    """``Sigma_{X|Y} = Sigma_X - Sigma_XY Sigma_Y^{-1} Sigma_XY^T``."""
    cond = np.linalg.cond(source.cov_y)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise IllConditionedSourceError(f"cov_y condition number {cond:.3e} exceeds {COND_MAX:.0e}")
    k = linalg.solve(source.cov_y, source.cov_xy.T, assume_a="pos")
    c = source.cov_x - source.cov_xy @ k
    return 0.5 * (c + c.T)


def critical_betas(eigenvalues) -> NDArray:
    """``1 / (1 - lambda)``, with ``inf`` for uninformative components."""
    lam = np.asarray(eigenvalues, dtype=float)
    out = np.full(lam.shape, np.inf)
    ok = lam < 1.0 - UNINFORMATIVE_TOL
    out[ok] = 1.0 / (1.0 - lam[ok])
    return out


def compute_spectrum(source: GaussianSource) -> GibSpectrum:
    """Solve the left eigenproblem through its symmetric whitened form.

    With ``Sigma_X = L L^T`` the matrix ``L^{-1} Sigma_{X|Y} L^{-T}`` is
    symmetric and shares its eigenvalues with ``Sigma_{X|Y} Sigma_X^{-1}``;
    an eigenvector ``u`` maps back to the left eigenvector ``v = L^{-T} u``.
    """
    cxy = conditional_covariance(source)
    try:
        chol = linalg.cholesky(source.cov_x, lower=True)
        half = linalg.solve_triangular(chol, cxy, lower=True)
        whitened = linalg.solve_triangular(chol, half.T, lower=True)
        whitened = 0.5 * (whitened + whitened.T)
        lam, u = linalg.eigh(whitened)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"eigensolver failed for source with dims ({source.dim_x}, {source.dim_y}): {exc}"
        ) from exc

    if lam.min() < -LAMBDA_BAND or lam.max() > 1.0 + LAMBDA_BAND:
        raise NumericalError(
            f"eigenvalues outside [0, 1]: min={lam.min():.3e}, max={lam.max():.3e}"
        )
    lam = np.clip(lam, 0.0, 1.0)
    order = np.argsort(lam, kind="stable")
    lam, u = lam[order], u[:, order]

    v = linalg.solve_triangular(chol.T, u, lower=False)
    rows = v.T.copy()
    r = np.einsum("ij,jk,ik->i", rows, source.cov_x, rows)
    return GibSpectrum(
        eigenvalues=_frozen(lam).ravel(),
        left_eigenvectors=_frozen(rows),
        r=_frozen(r).ravel(),
        critical_betas=_frozen(critical_betas(lam)).ravel(),
        d_min=source.d_min,
    )


def beta_grid(spectrum: GibSpectrum) -> NDArray:
    """Candidate betas: each critical value from the second usable one on,
    plus ten times the last, so at least one row is always transmitted."""
    n = spectrum.n_usable
    if n == 0:
        raise EmptyGridError("source has no informative component")
    crit = spectrum.critical_betas[:n]
    return np.append(crit[1:], 10.0 * crit[-1])


def _active(spectrum: GibSpectrum, beta: float) -> NDArray:
    lam = spectrum.eigenvalues[: spectrum.d_min]
    # strict: at beta == beta_i^c the i-th row would have alpha_i = 0
    return beta * (1.0 - lam) - 1.0 > 1e-12 * max(1.0, beta)


def n_active(spectrum: GibSpectrum, beta: float) -> int:
    return int(np.count_nonzero(_active(spectrum, beta)))


def projection(spectrum: GibSpectrum, source: GaussianSource, beta: float) -> GibProjection:
    """Encoder matrix ``A`` (``d_min x d_x``) for trade-off ``beta``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    d_min = spectrum.d_min
    n = n_active(spectrum, beta)
    lam = np.maximum(spectrum.eigenvalues[:n], LAMBDA_FLOOR)
    alphas = np.sqrt((beta * (1.0 - lam) - 1.0) / (lam * spectrum.r[:n]))
    a = np.zeros((d_min, source.dim_x))
    a[:n] = alphas[:, None] * spectrum.left_eigenvectors[:n]
    return GibProjection(
        beta=float(beta),
        n_beta=n,
        matrix_a=_frozen(a),
        alphas=_frozen(alphas).ravel(),
        noise_cov=_frozen(np.eye(d_min)),
    )


def mutual_informations(spectrum: GibSpectrum, beta: float) -> tuple[float, float]:
    """``(I(x;z), I(z;y))`` in bits on the optimal frontier."""
    n = n_active(spectrum, beta)
    if n == 0:
        return 0.0, 0.0
    lam = np.maximum(spectrum.eigenvalues[:n], LAMBDA_FLOOR)
    i_xz = 0.5 * np.sum(np.log2((beta - 1.0) * (1.0 - lam) / lam))
    i_zy = i_xz - 0.5 * np.sum(np.log2(beta * (1.0 - lam)))
    return float(max(i_xz, 0.0)), float(max(i_zy, 0.0))


def _z_cov(source: GaussianSource, proj: GibProjection) -> NDArray:
    a = proj.matrix_a
    return a @ source.cov_x @ a.T + proj.noise_cov


def decoder_and_nmse(source: GaussianSource, proj: GibProjection) -> tuple[NDArray, float]:
    """LMMSE decoder ``M`` (``d_y x d_min``) and the NMSE of ``y_hat = M z``."""
    d_min = proj.matrix_a.shape[0]
    if proj.n_beta == 0:
        return np.zeros((source.dim_y, d_min)), 1.0
    cz = _z_cov(source, proj)
    cond = np.linalg.cond(cz)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise NumericalError(f"Sigma_Z condition number {cond:.3e} exceeds {COND_MAX:.0e}")
    cyz = source.cov_xy.T @ proj.matrix_a.T
    m = linalg.solve(cz, cyz.T, assume_a="pos").T
    explained = np.trace(m @ cyz.T)
    return m, float(1.0 - explained / np.trace(source.cov_y))


def z_entropy_bits(source: GaussianSource, proj: GibProjection) -> float:
    """Transmit size of ``z``: its differential entropy in bits, floored at
    one bit per active component."""
    n = proj.n_beta
    if n == 0:
        return 0.0
    cz = _z_cov(source, proj)[:n, :n]
    sign, logdet = np.linalg.slogdet(cz)
    if sign <= 0:
        raise NumericalError("Sigma_Z is not positive definite")
    h = 0.5 * (n * LOG2_2PIE + logdet / np.log(2.0))
    return float(max(h, n))


def mutual_information_xy(source: GaussianSource) -> float:
    """``I(x;y)`` in bits, the ceiling of any ``I(z;y)``."""
    _, ld_x = np.linalg.slogdet(source.cov_x)
    _, ld_c = np.linalg.slogdet(conditional_covariance(source))
    return float(0.5 * (ld_x - ld_c) / np.log(2.0))


def rate_point(source: GaussianSource, spectrum: GibSpectrum, beta: float) -> GibRatePoint:
    proj = projection(spectrum, source, beta)
    i_xz, i_zy = mutual_informations(spectrum, beta)
    _, nmse = decoder_and_nmse(source, proj)
    return GibRatePoint(
        beta=float(beta),
        n_beta=proj.n_beta,
        i_xz_bits=i_xz,
        i_zy_bits=i_zy,
        nmse=nmse,
        entropy_bits=z_entropy_bits(source, proj),
    )


def frontier(source: GaussianSource, betas) -> list[GibRatePoint]:
    spectrum = compute_spectrum(source)
    return [rate_point(source, spectrum, b) for b in betas]


def rate_table(source: GaussianSource) -> list[GibRatePoint]:
    """Rate points over the source's beta grid, in grid order."""
    spectrum = compute_spectrum(source)
    return [rate_point(source, spectrum, b) for b in beta_grid(spectrum)]
