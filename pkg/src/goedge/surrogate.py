"""Cost and distortion model of the masked vector-quantization image codec.

Both the vector-quantization workload and the transmitted bit count grow
linearly with the total kept fraction ``m_x + m_s``; distortion (LPIPS) is
replaced by the separable surrogate ``a / m_x**b + c / m_s``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import optimize

from .errors import DomainError, FitError

M_MIN = 1e-4
CODEBOOK_SIZE = 1024
LATENT_DIM = 256
MAX_VECTORS = 512
# 3 flops per coordinate (sub, square, add) plus the final comparison
OPS_PER_DISTANCE = 3 * LATENT_DIM + 1
OPS_FULL = OPS_PER_DISTANCE * (CODEBOOK_SIZE - 1) * MAX_VECTORS
BITS_PER_INDEX = 10  # log2(CODEBOOK_SIZE)
PIXELS = MAX_VECTORS * LATENT_DIM  # H*W, one latent position per 16x16 patch


@dataclass(frozen=True)
class SurrogateParams:
    a: float = 2.58e-1
    b: float = 1.20e-1
    c: float = 2.95e-3
    fit_residual: float | None = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise ValueError("surrogate parameters a, b, c must be positive")


DEFAULT_PARAMS = SurrogateParams()


@dataclass(frozen=True)
class MaskPair:
    m_x: float
    m_s: float
    m_min: float = M_MIN

    def __post_init__(self):
        for name in ("m_x", "m_s"):
            v = getattr(self, name)
            if not self.m_min <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [{self.m_min}, 1]")


def ops_count(m_x, m_s):
    """Vector-quantization flops for the kept latent vectors."""
    return OPS_FULL * (np.asarray(m_x, dtype=float) + np.asarray(m_s, dtype=float))


def bits_count(m_x, m_s):
    """Upper bound on transmitted bits: ``512 * (10 (m_x + m_s) + 2)``."""
    s = np.asarray(m_x, dtype=float) + np.asarray(m_s, dtype=float)
    return MAX_VECTORS * (BITS_PER_INDEX * s + 2.0)


def bpp(m_x, m_s):
    s = np.asarray(m_x, dtype=float) + np.asarray(m_s, dtype=float)
    return (BITS_PER_INDEX * s + 2.0) / LATENT_DIM


def g_approx(m_x, m_s, p: SurrogateParams = DEFAULT_PARAMS, m_min: float = M_MIN):
    mx = np.asarray(m_x, dtype=float)
    ms = np.asarray(m_s, dtype=float)
    # tolerate round-off from clipping at the floor
    floor = m_min * (1.0 - 1e-12)
    if np.any(mx < floor) or np.any(ms < floor):
        raise DomainError(f"masking fraction below m_min={m_min}")
    g = p.a * mx ** (-p.b) + p.c / ms
    return float(g) if g.ndim == 0 else g


def g_approx_grad(m_x, m_s, p: SurrogateParams = DEFAULT_PARAMS):
    mx = np.asarray(m_x, dtype=float)
    ms = np.asarray(m_s, dtype=float)
    return -p.a * p.b * mx ** (-p.b - 1.0), -p.c / ms**2


def m_x_reduction(
    m_s,
    p: SurrogateParams = DEFAULT_PARAMS,
    mode: Literal["stationary", "paper"] = "stationary",
    m_min: float = M_MIN,
):
    """Optimal ``m_x`` as a function of ``m_s``.

    Because workload and bits depend on the masks only through their sum,
    an interior optimum has equal marginal distortion in both masks:
    ``a b m_x**-(1+b) = c m_s**-2`` ("stationary").  The "paper" mode keeps
    the published closed form ``(a/c)**(1/b) m_s**(2/b)``.
    """
    ms = np.asarray(m_s, dtype=float)
    if mode == "stationary":
        log_mx = (np.log(p.a * p.b / p.c) + 2.0 * np.log(ms)) / (1.0 + p.b)
    elif mode == "paper":
        log_mx = (np.log(p.a / p.c) + 2.0 * np.log(ms)) / p.b
    else:
        raise ValueError(f"unknown reduction mode {mode!r}")
    # exp in log space; the literal form overflows for m_s near 1
    mx = np.exp(np.clip(log_mx, np.log(m_min), 0.0))
    return float(mx) if mx.ndim == 0 else mx


def _fit_seed(mx, ms, g):
    best = None
    for b in np.geomspace(1e-3, 3.0, 60):
        design = np.column_stack([mx ** (-b), 1.0 / ms])
        coef, *_ = np.linalg.lstsq(design, g, rcond=None)
        sse = np.sum((design @ coef - g) ** 2)
        if coef.min() > 0 and (best is None or sse < best[0]):
            best = (sse, coef[0], b, coef[1])
    if best is None:
        raise FitError("no positive (a, c) pair fits the samples for any exponent b")
    return np.log(best[1:])


def fit(samples) -> SurrogateParams:
    """Least-squares fit of ``(a, b, c)`` to ``(m_x, m_s, distortion)`` rows.

    The exponent is seeded by a scan in which ``(a, c)`` are solved
    linearly, then all three are refined jointly by Levenberg-Marquardt in
    log-parameters (keeps them positive).
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] < 6:
        raise FitError("need at least 6 samples of (m_x, m_s, distortion)")
    mx, ms, g = data.T
    if np.any(mx <= 0) or np.any(ms <= 0):
        raise FitError("masking fractions must be positive")
    if np.unique(mx).size < 2 or np.unique(ms).size < 2:
        raise FitError("samples must span at least two values of both m_x and m_s")

    def residual(theta):
        a, b, c = np.exp(theta)
        return a * mx ** (-b) + c / ms - g

    def jac(theta):
        a, b, c = np.exp(theta)
        t = a * mx ** (-b)
        return np.column_stack([t, -t * b * np.log(mx), c / ms])

    sol = optimize.least_squares(
        residual, _fit_seed(mx, ms, g), jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15
    )
    a, b, c = np.exp(sol.x)
    if b < 1e-6 or c < 1e-12 or not np.all(np.isfinite(sol.x)):
        raise FitError(f"degenerate fit (a={a:.3g}, b={b:.3g}, c={c:.3g}); surface is flat")
    return SurrogateParams(a=float(a), b=float(b), c=float(c), fit_residual=float(np.mean(sol.fun**2)))


def load_fit_csv(path) -> np.ndarray:
    """Read a CSV with header columns ``m_x, m_s, distortion``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"m_x", "m_s", "distortion"} - set(reader.fieldnames or ())
        if missing:
            raise FitError(f"fit CSV lacks columns {sorted(missing)}")
        return np.array([[float(r["m_x"]), float(r["m_s"]), float(r["distortion"])] for r in reader])
