"""Compiled per-slot loops for the simulator.

These mirror, scalar by scalar, the vectorised solvers in ``slotopt`` and
the realisation step of ``sim.Simulator.slot_step``; the test-suite checks
the two paths against each other.  They exist because a run may need
``1e5`` sequential slots, and per-slot numpy call overhead dominates at
that length.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LN2 = math.log(2.0)
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

# column layout of the per-slot output array ``out[slot, device, column]``
COLUMNS = (
    "beta_or_ms", "m_x", "rate", "freq", "f_es", "delay", "metric", "p_cpu", "p_tr", "p_es",
    "queue_t", "queue_u", "blocked", "gain", "d_cpu", "d_tr", "d_es", "overrun",
)
(C_SET, C_MX, C_RATE, C_FREQ, C_FES, C_DELAY, C_METRIC, C_PCPU, C_PTR, C_PES,
 C_QT, C_QU, C_BLOCKED, C_GAIN, C_DCPU, C_DTR, C_DES, C_OVERRUN) = range(len(COLUMNS))


@njit(cache=True)
def lambert_w0(x):
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    w = math.log1p(x)
    for _ in range(100):
        g = w - x * math.exp(-w)
        wp1 = w + 1.0
        dw = g / (wp1 - (w + 2.0) * g / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 4.0 * 2.220446049250313e-16 * max(abs(w), 1e-300):
            break
    return w


@njit(cache=True)
def _rate(e, n, h, bw, n0, v, r_max):
    load = e * n
    if not (load * h > 0.0):
        return 0.0
    arg = math.sqrt(load * h * (LN2 / (4.0 * v)) / (bw * bw * n0))
    r = math.inf if math.isinf(arg) else 2.0 / LN2 * bw * lambert_w0(arg)
    return min(max(r, 0.0), r_max)


@njit(cache=True)
def _freq(e, w, v, gamma, eta, rho, f_max):
    load = e * w
    if not (load > 0.0):
        return 0.0
    den = 3.0 * v * gamma * eta * rho
    f = math.inf if den == 0.0 else (load / den) ** 0.25
    return min(max(f, 0.0), f_max)


@njit(cache=True)
def _objective(rate, freq, e, n, w, nu_u, metric, h, bw, n0, v, gamma, eta, rho, transmit):
    tx = 0.0
    if transmit:
        tx_load = e * n
        d_tr = 0.0
        if tx_load > 0.0:
            d_tr = math.inf if rate == 0.0 else tx_load / rate
        scale = v * bw * n0
        p_tr = (math.nan if scale == 0.0 else math.inf) if h == 0.0 else scale / h * math.exp(rate * LN2 / bw)
        tx = d_tr + p_tr
    cpu_load = e * w
    d_cpu = 0.0
    if cpu_load > 0.0:
        d_cpu = math.inf if freq == 0.0 else cpu_load / (freq * rho)
    obj = tx + d_cpu + nu_u * metric + v * gamma * eta * freq**3
    return math.inf if math.isnan(obj) else obj


@njit(cache=True)
def _realise(out, s, k, h, rate, freq, n, w, d_es, metric, blocked, bw, n0, eta, rho, penalty):
    d_cpu = 0.0
    if w > 0.0:
        d_cpu = math.inf if freq == 0.0 else w / (freq * rho)
    d_tr = 0.0
    if n > 0.0:
        d_tr = math.inf if rate == 0.0 else n / rate
    p_tr = 0.0
    if rate > 0.0 and not blocked:
        p_tr = bw * n0 / h * math.expm1(rate * LN2 / bw)
    delay = d_cpu + d_tr + d_es
    stalled = blocked or not math.isfinite(delay)
    if stalled:
        delay = penalty
    out[s, k, C_RATE] = rate
    out[s, k, C_FREQ] = freq
    out[s, k, C_DELAY] = delay
    out[s, k, C_METRIC] = metric
    out[s, k, C_PCPU] = eta * freq**3
    out[s, k, C_PTR] = p_tr
    out[s, k, C_BLOCKED] = 1.0 if stalled else 0.0
    out[s, k, C_GAIN] = h
    out[s, k, C_DCPU] = d_cpu
    out[s, k, C_DTR] = d_tr
    out[s, k, C_DES] = d_es
    return delay


@njit(cache=True)
def _queues(out, s, k, t_q, u_q, delay, metric, eps, nu, d_t, g_t, slot_len):
    t_q[k] = max(0.0, t_q[k] + eps[k] * (delay - d_t[k]))
    u_q[k] = max(0.0, u_q[k] + nu[k] * (metric - g_t[k]))
    out[s, k, C_QT] = t_q[k]
    out[s, k, C_QU] = u_q[k]
    out[s, k, C_OVERRUN] = 1.0 if delay > slot_len else 0.0


@njit(cache=True)
def gib_block(out, f_c_out, t_q, u_q, gain, r_max, eps, nu, d_t, g_t, penalty, v,
              bw, n0, gamma, eta, rho, f_max,
              tb_beta, tb_bits, tb_wops, tb_wes, tb_nmse, tb_len,
              w_es_max, rho_es, es_eta, f_c_max, slot_len):
    """Advance ``gain.shape[0]`` slots in GIB mode; queues update in place."""
    n_slots, kk = gain.shape
    idx = np.zeros(kk, np.int64)
    rate = np.zeros(kk)
    freq = np.zeros(kk)
    roots = np.zeros(kk)
    for s in range(n_slots):
        for k in range(kk):
            e = eps[k] * t_q[k]
            nu_u = nu[k] * u_q[k]
            h = gain[s, k]
            blocked = h <= 0.0
            h_eff = 0.0 if blocked else h
            best = math.inf
            best_j = 0
            best_r = 0.0
            best_f = 0.0
            for j in range(tb_len[k]):
                r = _rate(e, tb_bits[k, j], h_eff, bw[k], n0[k], v, r_max[s, k])
                f = _freq(e, tb_wops[k, j], v, gamma[k], eta[k], rho[k], f_max[k])
                obj = _objective(r, f, e, tb_bits[k, j], tb_wops[k, j], nu_u, tb_nmse[k, j], h,
                                 bw[k], n0[k], v, gamma[k], eta[k], rho[k], not blocked)
                if j == 0 or obj < best:
                    best, best_j, best_r, best_f = obj, j, r, f
            idx[k] = best_j
            rate[k] = 0.0 if blocked else best_r
            freq[k] = best_f
            roots[k] = math.sqrt(max(e * w_es_max / rho_es[k], 0.0))
        s_root = 0.0
        for k in range(kk):
            s_root += roots[k]
        f_c = 0.0
        if s_root > 0.0:
            f_c = math.inf if v * es_eta <= 0.0 else (s_root * s_root / (3.0 * v * es_eta)) ** 0.25
            f_c = min(f_c, f_c_max)
        f_c_out[s] = f_c
        p_es = es_eta * f_c**3
        sum_f = 0.0
        for k in range(kk):
            sum_f += roots[k] / s_root * f_c if s_root > 0.0 else 0.0
        for k in range(kk):
            f_es = roots[k] / s_root * f_c if s_root > 0.0 else 0.0
            j = idx[k]
            w_es = tb_wes[k, j]
            d_es = 0.0
            if w_es > 0.0:
                d_es = math.inf if f_es == 0.0 else w_es / (f_es * rho_es[k])
            h = gain[s, k]
            metric = tb_nmse[k, j]
            delay = _realise(out, s, k, h, rate[k], freq[k], tb_bits[k, j], tb_wops[k, j], d_es,
                             metric, h <= 0.0, bw[k], n0[k], eta[k], rho[k], penalty[k])
            out[s, k, C_SET] = tb_beta[k, j]
            out[s, k, C_MX] = math.nan
            out[s, k, C_FES] = f_es
            out[s, k, C_PES] = p_es * f_es / sum_f if sum_f > 0.0 else 0.0
            _queues(out, s, k, t_q, u_q, delay, metric, eps, nu, d_t, g_t, slot_len)


@njit(cache=True)
def _sqgan_eval(log_ms, e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min):
    m_s = math.exp(log_ms)
    if literal_mode:
        log_mx = (math.log(a / c) + 2.0 * math.log(m_s)) / b
    else:
        log_mx = (math.log(a * b / c) + 2.0 * math.log(m_s)) / (1.0 + b)
    m_x = math.exp(min(max(log_mx, math.log(m_min)), 0.0))
    m_s = min(max(m_s, m_min), 1.0)
    m_x = min(max(m_x, m_min), 1.0)
    total = m_x + m_s
    n = 512.0 * (10.0 * total + 2.0)
    w = 402783744.0 * total
    blocked = h <= 0.0
    h_eff = 0.0 if blocked else h
    r = _rate(e, n, h_eff, bw, n0, v, r_max)
    f = _freq(e, w, v, 1.0, eta, rho, f_max)
    metric = a * m_x ** (-b) + c / m_s
    obj = _objective(r, f, e, n, w, nu_u, metric, h, bw, n0, v, 1.0, eta, rho, not blocked)
    return obj, m_x, m_s, r, f, n, w, metric


@njit(cache=True)
def sqgan_device(e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min, grid, tol):
    """Scan + golden-section search over ``log m_s`` for one device."""
    m = grid.size
    best_j = 0
    best_obj = math.inf
    for j in range(m):
        o = _sqgan_eval(grid[j], e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min)[0]
        if j == 0 or o < best_obj:
            best_obj, best_j = o, j
    best_log = grid[best_j]
    lo = grid[max(best_j - 1, 0)]
    hi = grid[min(best_j + 1, m - 1)]
    x1 = hi - INVPHI * (hi - lo)
    x2 = lo + INVPHI * (hi - lo)
    f1 = _sqgan_eval(x1, e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min)[0]
    f2 = _sqgan_eval(x2, e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min)[0]
    while hi - lo > tol:
        if f1 <= f2:
            hi = x2
            x2, f2 = x1, f1
            x1 = hi - INVPHI * (hi - lo)
            f1 = _sqgan_eval(x1, e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min)[0]
        else:
            lo = x1
            x1, f1 = x2, f2
            x2 = lo + INVPHI * (hi - lo)
            f2 = _sqgan_eval(x2, e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min)[0]
    mid = 0.5 * (lo + hi)
    fmid = _sqgan_eval(mid, e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min)[0]
    if fmid < best_obj:
        best_log = mid
    return _sqgan_eval(best_log, e, nu_u, h, r_max, v, bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min)


@njit(cache=True)
def sqgan_block(out, t_q, u_q, gain, r_max, noise, noise_std, eps, nu, d_t, g_t, penalty, v,
                bw, n0, eta, rho, f_max, a, b, c, literal_mode, m_min, grid, tol, slot_len):
    """Advance ``gain.shape[0]`` slots in SQ-GAN mode; queues update in place."""
    n_slots, kk = gain.shape
    for s in range(n_slots):
        for k in range(kk):
            e = eps[k] * t_q[k]
            nu_u = nu[k] * u_q[k]
            h = gain[s, k]
            obj, m_x, m_s, r, f, n, w, metric = sqgan_device(
                e, nu_u, h, r_max[s, k], v, bw[k], n0[k], eta[k], rho[k], f_max[k],
                a, b, c, literal_mode, m_min, grid, tol,
            )
            blocked = h <= 0.0
            if noise_std > 0.0:
                metric = max(metric + noise_std * noise[s, k], 0.0)
            delay = _realise(out, s, k, h, 0.0 if blocked else r, f, n, w, 0.0, metric, blocked,
                             bw[k], n0[k], eta[k], rho[k], penalty[k])
            out[s, k, C_SET] = m_s
            out[s, k, C_MX] = m_x
            out[s, k, C_FES] = 0.0
            out[s, k, C_PES] = 0.0
            _queues(out, s, k, t_q, u_q, delay, metric, eps, nu, d_t, g_t, slot_len)
