"""Per-slot drift-plus-penalty solvers.

Given the virtual-queue backlogs of a slot, each edge device minimises

    eT N / R + eT W / (f rho) + nuU G + V (B N0 / h) exp(R ln2 / B) + V Gamma eta f^3

where ``eT = epsilon * T`` and ``nuU = nu * U``.  For a fixed encoder
setting the rate and CPU terms separate and have closed-form minimisers
(Lambert W for the rate, a quartic root for the frequency); the encoder
setting itself is chosen by enumeration (GIB grid) or by a 1-D search
(masking fractions).  The edge server splits its clock across devices.

All solvers are vectorised over devices: per-device inputs are arrays of
shape ``(K,)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import surrogate as sg
from .errors import DomainError, NumericalError

LN2 = np.log(2.0)
SCAN_POINTS = 64
GOLDEN_LOG_TOL = 1e-7
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def lambert_w0(x):
    """Principal branch of Lambert W on ``x >= 0`` (real part of scipy's branch 0)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise DomainError("lambert_w0 is defined here for x >= 0 only")
    w = special.lambertw(xa).real
    if not np.all(np.isfinite(w[np.isfinite(xa)])):
        raise NumericalError("Lambert W evaluation failed")
    return float(w) if w.ndim == 0 else w


def _scalar_or(a):
    return float(a) if np.ndim(a) == 0 else a


def optimal_rate(e_t, n_bits, h, bandwidth, noise_psd, v, r_max):
    """Rate minimising ``eT N / R + V (B N0 / h) exp(R ln2 / B)`` on ``[0, r_max]``."""
    e_t, n_bits, h = (np.asarray(a, dtype=float) for a in (e_t, n_bits, h))
    bandwidth = np.asarray(bandwidth, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.sqrt(e_t * LN2 * h * n_bits / (4.0 * bandwidth**2 * v * noise_psd))
    arg = np.where(e_t * n_bits * h > 0, arg, 0.0)
    finite = np.isfinite(arg)
    r = np.where(
        finite, 2.0 * bandwidth / LN2 * lambert_w0(np.where(finite, arg, 0.0)), np.inf
    )
    return _scalar_or(np.clip(r, 0.0, r_max))


# name used by the GIB-mode algorithm description
optimal_rate_gib = optimal_rate


def optimal_freq_device(e_t, w_ops, v, gamma, eta, rho, f_max):
    """CPU clock minimising ``eT W / (f rho) + V Gamma eta f^3`` on ``[0, f_max]``."""
    num = np.asarray(e_t, dtype=float) * np.asarray(w_ops, dtype=float)
    den = 3.0 * v * np.asarray(gamma, dtype=float) * eta * rho
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(num > 0, (num / den) ** 0.25, 0.0)
    return _scalar_or(np.clip(f, 0.0, f_max))


def ed_objective(rate, freq, e_t, n_bits, w_ops, nu_u, metric, h, bandwidth, noise_psd, v, gamma, eta, rho,
                 transmit=True):
    """Per-slot edge-device drift-plus-penalty objective ``g_k``.

    ``0 * inf`` delay terms (empty queue, idle resource) count as zero.
    Where ``transmit`` is false (blocked link) the two transmission terms
    are left out.
    """
    rate, freq, e_t, n_bits, w_ops, h = (
        np.asarray(a, dtype=float) for a in (rate, freq, e_t, n_bits, w_ops, h)
    )
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tx_load = e_t * n_bits
        cpu_load = e_t * w_ops
        d_tr = np.where(tx_load > 0, tx_load / rate, 0.0)
        d_cpu = np.where(cpu_load > 0, cpu_load / (freq * rho), 0.0)
        p_tr = v * bandwidth * noise_psd / h * np.exp(rate * LN2 / bandwidth)
        tx = np.where(transmit, d_tr + p_tr, 0.0)
    p_cpu = v * gamma * eta * freq**3
    return _scalar_or(tx + d_cpu + nu_u * metric + p_cpu)


@dataclass(frozen=True)
class LyapunovWeights:
    """Per-device queue learning rates and CPU-power weight.

    The penalty weight ``V`` is shared by the whole network and lives on
    the scenario.
    """

    epsilon: float = 1.0
    nu: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.nu > 0 and self.gamma > 0):
            raise ValueError("epsilon, nu and gamma must be positive")


@dataclass(frozen=True)
class EdParams:
    """Static per-device quantities, each an array of shape ``(K,)``."""

    bandwidth: np.ndarray
    noise_psd: np.ndarray
    max_tx_power: np.ndarray
    f_max: np.ndarray
    eta: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray

    @classmethod
    def build(cls, **fields) -> "EdParams":
        arrays = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in fields.items()}
        k = max(a.size for a in arrays.values())
        return cls(**{name: np.broadcast_to(a, (k,)).copy() for name, a in arrays.items()})

    @property
    def k(self) -> int:
        return self.bandwidth.size


@dataclass(frozen=True)
class GibTable:
    """Per-device rate tables padded to a common grid length.

    Padded entries carry ``beta = nan`` and are never selected.
    """

    beta: np.ndarray  # (K, G)
    n_bits: np.ndarray
    w_ops: np.ndarray
    w_es: np.ndarray
    nmse: np.ndarray

    @classmethod
    def from_points(cls, per_device, dim_x, dim_y) -> "GibTable":
        g = max(len(p) for p in per_device)
        shape = (len(per_device), g)
        out = {n: np.full(shape, np.nan) for n in ("beta", "n_bits", "w_ops", "w_es", "nmse")}
        for k, points in enumerate(per_device):
            for j, pt in enumerate(points):
                out["beta"][k, j] = pt.beta
                out["n_bits"][k, j] = pt.entropy_bits
                out["w_ops"][k, j] = dim_x[k] * pt.n_beta
                out["w_es"][k, j] = dim_y[k] * pt.n_beta
                out["nmse"][k, j] = pt.nmse
        return cls(**out)


@dataclass(frozen=True)
class EdDecisionGib:
    """Decisions of ``K`` devices in GIB mode (arrays of shape ``(K,)``)."""

    index: np.ndarray
    beta: np.ndarray
    rate: np.ndarray
    freq: np.ndarray
    objective: np.ndarray
    n_bits: np.ndarray
    w_ops: np.ndarray
    w_es: np.ndarray
    nmse: np.ndarray
    blocked: np.ndarray


def solve_ed_gib(e_t, nu_u, h, r_max, v, ed: EdParams, table: GibTable) -> EdDecisionGib:
    """Closed-form rate/frequency per candidate beta, then the grid argmin.

    ``np.argmin`` returns the first minimum, so ties go to the smaller beta.
    A device with zero gain is blocked: it cannot transmit, and its beta is
    chosen on the remaining terms.
    """
    e_t, nu_u, h, r_max = (np.asarray(a, dtype=float) for a in (e_t, nu_u, h, r_max))
    if np.isnan(table.beta[:, 0]).any():
        raise NumericalError("a device has an empty beta grid")
    blocked = h <= 0
    # same algebra as optimal_rate / optimal_freq_device / ed_objective, inlined
    # on (K, G) arrays because this runs once per simulated slot
    et = e_t[:, None]
    bw = ed.bandwidth[:, None]
    n0 = ed.noise_psd[:, None]
    hh = np.where(blocked, 0.0, h)[:, None]
    n_bits, w_ops = table.n_bits, table.w_ops
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tx_load = et * n_bits
        arg = np.sqrt(tx_load * hh * (LN2 / (4.0 * v)) / (bw * bw * n0))
        arg = np.where(tx_load * hh > 0, arg, 0.0)
        finite = np.isfinite(arg)
        rate = np.where(finite, (2.0 / LN2) * bw * lambert_w0(np.where(finite, arg, 0.0)), np.inf)
        rate = np.clip(rate, 0.0, r_max[:, None])
        cpu_load = et * w_ops
        rho = ed.rho[:, None]
        freq = np.where(cpu_load > 0, (cpu_load / (3.0 * v * ed.gamma[:, None] * ed.eta[:, None] * rho)) ** 0.25, 0.0)
        freq = np.clip(freq, 0.0, ed.f_max[:, None])
        d_tr = np.where(tx_load > 0, tx_load / rate, 0.0)
        p_tr = v * bw * n0 / hh * np.exp(rate * LN2 / bw)
        tx = np.where(blocked[:, None], 0.0, d_tr + p_tr)
        d_cpu = np.where(cpu_load > 0, cpu_load / (freq * rho), 0.0)
        obj = tx + d_cpu + nu_u[:, None] * table.nmse + (v * ed.gamma * ed.eta)[:, None] * freq**3
    obj = np.where(np.isnan(obj), np.inf, obj)
    idx = np.argmin(obj, axis=1)
    rows = np.arange(idx.size)
    return EdDecisionGib(
        index=idx,
        beta=table.beta[rows, idx],
        rate=np.where(blocked, 0.0, rate[rows, idx]),
        freq=freq[rows, idx],
        objective=obj[rows, idx],
        n_bits=n_bits[rows, idx],
        w_ops=w_ops[rows, idx],
        w_es=table.w_es[rows, idx],
        nmse=table.nmse[rows, idx],
        blocked=blocked,
    )


@dataclass(frozen=True)
class EsDecision:
    f_c: float
    f_es: np.ndarray


def solve_es(e_t, w_es_max, rho_es, v, eta, f_c_max) -> EsDecision:
    """Edge-server clock and its split across devices.

    The split ``f_k = sqrt(A_k) / S * f_c`` is kept when ``f_c`` is clipped.
    """
    a = np.asarray(e_t, dtype=float) * w_es_max / np.asarray(rho_es, dtype=float)
    a = np.maximum(a, 0.0)
    root = np.sqrt(a)
    s = float(root.sum())
    if s == 0.0:
        return EsDecision(f_c=0.0, f_es=np.zeros_like(a))
    f_c = (s * s / (3.0 * v * eta)) ** 0.25 if v * eta > 0 else np.inf
    f_c = float(min(f_c, f_c_max))
    return EsDecision(f_c=f_c, f_es=root / s * f_c)


def es_objective(e_t, w_es_max, rho_es, f_es, f_c, v, eta):
    a = np.asarray(e_t, dtype=float) * w_es_max / np.asarray(rho_es, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(a > 0, a / np.asarray(f_es, dtype=float), 0.0)
    return float(terms.sum() + v * eta * f_c**3)


@dataclass(frozen=True)
class EdDecisionSqgan:
    m_x: np.ndarray
    m_s: np.ndarray
    rate: np.ndarray
    freq: np.ndarray
    objective: np.ndarray
    n_bits: np.ndarray
    w_ops: np.ndarray
    metric: np.ndarray
    blocked: np.ndarray


def _sqgan_eval(log_ms, e_t, nu_u, h, r_max, v, ed, params, mode, m_min):
    """Objective along the reduced curve ``m_x = m_x(m_s)``; broadcasts."""
    m_s = np.exp(log_ms)
    m_x = sg.m_x_reduction(m_s, params, mode, m_min)
    m_s = np.clip(m_s, m_min, 1.0)
    m_x = np.clip(m_x, m_min, 1.0)
    n = sg.bits_count(m_x, m_s)
    w = sg.ops_count(m_x, m_s)
    blocked = h <= 0
    h_eff = np.where(blocked, 0.0, h)
    rate = np.asarray(optimal_rate(e_t, n, h_eff, ed.bandwidth, ed.noise_psd, v, r_max))
    freq = np.asarray(optimal_freq_device(e_t, w, v, 1.0, ed.eta, ed.rho, ed.f_max))
    metric = sg.g_approx(m_x, m_s, params, m_min)
    obj = np.asarray(
        ed_objective(rate, freq, e_t, n, w, nu_u, metric, h, ed.bandwidth, ed.noise_psd, v, 1.0,
                     ed.eta, ed.rho, transmit=~blocked),
        dtype=float,
    )
    obj = np.where(np.isnan(obj), np.inf, obj)
    return obj, m_x, m_s, rate, freq, n, w, metric


def solve_ed_sqgan(
    e_t, nu_u, h, r_max, v, ed: EdParams,
    params: sg.SurrogateParams = sg.DEFAULT_PARAMS,
    mode: str = "stationary",
    m_min: float = sg.M_MIN,
) -> EdDecisionSqgan:
    """1-D search over ``m_s`` with ``m_x``, rate and clock eliminated.

    A log-spaced scan of ``SCAN_POINTS`` values (end points included)
    brackets the minimum, golden-section search in ``log m_s`` refines it,
    and the best value seen overall is returned.  The CPU-power weight is
    fixed to one in this mode.
    """
    e_t, nu_u, h, r_max = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (e_t, nu_u, h, r_max))
    k = e_t.size
    col = lambda a: np.asarray(a)[:, None]  # noqa: E731
    edc = EdParams(**{f: col(getattr(ed, f)) for f in ed.__dataclass_fields__})
    args = (col(e_t), col(nu_u), col(h), col(r_max), v, edc, params, mode, m_min)

    lo_log, hi_log = np.log(m_min), 0.0
    grid = np.linspace(lo_log, hi_log, SCAN_POINTS)
    grid[-1] = 0.0
    scan = _sqgan_eval(np.broadcast_to(grid, (k, SCAN_POINTS)), *args)[0]
    j = np.argmin(scan, axis=1)
    best_log = grid[j]
    best_obj = scan[np.arange(k), j]

    a = grid[np.maximum(j - 1, 0)]
    b = grid[np.minimum(j + 1, SCAN_POINTS - 1)]
    flat = lambda x: x[:, None]  # noqa: E731
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = _sqgan_eval(flat(c), *args)[0][:, 0]
    fd = _sqgan_eval(flat(d), *args)[0][:, 0]
    while np.max(b - a) > GOLDEN_LOG_TOL:
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        fnew = _sqgan_eval(flat(new), *args)[0][:, 0]
        c, d, fc, fd = (
            np.where(left, new, d),
            np.where(left, c, new),
            np.where(left, fnew, fd),
            np.where(left, fc, fnew),
        )
    mid = 0.5 * (a + b)
    fmid = _sqgan_eval(flat(mid), *args)[0][:, 0]
    better = fmid < best_obj
    best_log = np.where(better, mid, best_log)

    obj, m_x, m_s, rate, freq, n, w, metric = (x[:, 0] for x in _sqgan_eval(flat(best_log), *args))
    blocked = h <= 0
    return EdDecisionSqgan(
        m_x=m_x, m_s=m_s, rate=np.where(blocked, 0.0, rate), freq=freq, objective=obj,
        n_bits=n, w_ops=w, metric=metric, blocked=blocked,
    )
