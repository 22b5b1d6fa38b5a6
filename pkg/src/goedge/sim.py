"""Slot-based Lyapunov simulation of an edge network.

Every slot the engine draws the channels, lets each device solve its
drift-plus-penalty sub-problem (and, in GIB mode, lets the server split its
clock), realises delays/metric/power, and updates the two virtual queues
per device.  A run lasts until the queues settle and then for a summary
window over which time averages are reported.
"""

from __future__ import annotations

import dataclasses
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import _kernels as kernels
from . import gib
from . import surrogate as sg
from .channel import STREAM_BLOCK, AbgParams, DeviceStreams, RadioConfig, gain_from_draws, pathloss_db
from .errors import ConfigError
from .slotopt import (
    GOLDEN_LOG_TOL, SCAN_POINTS, EdParams, GibTable, LyapunovWeights, solve_ed_gib, solve_ed_sqgan,
    solve_es,
)

LN2 = math.log(2.0)

TRACE_COLUMNS = (
    "t", "device", "beta_or_ms", "m_x", "rate_bps", "freq_hz", "f_es_hz", "delay_s", "metric",
    "p_cpu_w", "p_tr_w", "p_es_w", "queue_t", "queue_u", "blocked",
)


@dataclass(frozen=True)
class CpuConfig:
    f_max: float
    eta: float
    rho: float
    p_cpu_max: float | None = None  # informational only


@dataclass(frozen=True)
class Targets:
    d_avg: float
    g_avg: float

    def __post_init__(self):
        if not (self.d_avg > 0 and self.g_avg > 0):
            raise ValueError("targets must be positive")


@dataclass(frozen=True)
class EdgeDeviceConfig:
    id: int
    distance_m: float
    cpu: CpuConfig
    radio: RadioConfig
    targets: Targets
    weights: LyapunovWeights = LyapunovWeights()
    source: gib.GaussianSource | None = None


@dataclass(frozen=True)
class EdgeServerConfig:
    f_c_max: float
    eta: float
    rho_es: tuple[float, ...]


@dataclass(frozen=True)
class SurrogateSettings:
    params: sg.SurrogateParams = sg.DEFAULT_PARAMS
    mode: Literal["stationary", "paper"] = "stationary"
    m_min: float = sg.M_MIN
    # std of additive noise on the metric fed to the queue (surrogate-vs-LPIPS gap)
    metric_noise_std: float = 0.0


@dataclass(frozen=True)
class Scenario:
    mode: Literal["gib", "sqgan"]
    seed: int
    devices: tuple[EdgeDeviceConfig, ...]
    v: float
    channel: AbgParams = AbgParams()
    server: EdgeServerConfig | None = None
    surrogate: SurrogateSettings = SurrogateSettings()
    max_slots: int = 200_000
    summary_window: int = 1000
    conv_window: int = 500
    conv_tol: float = 1e-3
    # realised delay of a slot that cannot finish (zero rate/clock, blocked link)
    delay_penalty_factor: float = 10.0
    divergence_factor: float = 1e6
    slot_duration: float = 1.0

    def __post_init__(self):
        if self.mode not in ("gib", "sqgan"):
            raise ConfigError("scenario.mode", f"unknown mode {self.mode!r}")
        if not self.devices:
            raise ConfigError("devices", "at least one device is required")
        if self.mode == "gib":
            if self.server is None:
                raise ConfigError("server", "GIB mode needs an edge server")
            if len(self.server.rho_es) != len(self.devices):
                raise ConfigError("server.rho_es", "need one entry per device")
            for i, d in enumerate(self.devices):
                if d.source is None:
                    raise ConfigError(f"devices[{i}].source", "GIB mode needs a Gaussian source")
        if self.v < 0:
            raise ConfigError("lyapunov.V", "must be non-negative")
        if self.conv_window < 100:
            raise ConfigError("scenario.convergence.window", "must be at least 100")

    @property
    def k(self) -> int:
        return len(self.devices)

    def with_overrides(self, *, d_avg=None, g_avg=None, gamma=None, v=None, seed=None) -> "Scenario":
        devices = []
        for d in self.devices:
            t = Targets(d.targets.d_avg if d_avg is None else d_avg,
                        d.targets.g_avg if g_avg is None else g_avg)
            w = d.weights if gamma is None else dataclasses.replace(d.weights, gamma=gamma)
            devices.append(dataclasses.replace(d, targets=t, weights=w))
        return dataclasses.replace(
            self, devices=tuple(devices), v=self.v if v is None else v,
            seed=self.seed if seed is None else seed,
        )


@dataclass
class VirtualQueueState:
    t_queue: np.ndarray
    u_queue: np.ndarray

    @classmethod
    def zeros(cls, k: int) -> "VirtualQueueState":
        return cls(np.zeros(k), np.zeros(k))


def update_queue(q, value, target, lr):
    """``max(0, q + lr (value - target))``."""
    return np.maximum(0.0, np.asarray(q) + lr * (np.asarray(value) - target))


def lyapunov(state: VirtualQueueState) -> float:
    return 0.5 * float(np.sum(state.t_queue**2) + np.sum(state.u_queue**2))


def drift_bound(state, delay, metric, eps, nu, d_avg, g_avg, d_max, g_max) -> float:
    """Quadratic upper bound on the one-slot Lyapunov drift.

    ``sum_k eps^2 (D_max - D_avg)^2 / 2 + eps T (D - D_avg)
    + nu^2 (G_max - G_avg)^2 / 2 + nu U (G - G_avg)``.
    """
    t, u = state.t_queue, state.u_queue
    return float(np.sum(
        0.5 * eps**2 * (d_max - d_avg) ** 2 + eps * t * (delay - d_avg)
        + 0.5 * nu**2 * (g_max - g_avg) ** 2 + nu * u * (metric - g_avg)
    ))


@dataclass(frozen=True)
class SlotRecord:
    """Realised quantities of one slot; per-device arrays of shape ``(K,)``."""

    t: int
    beta_or_ms: np.ndarray
    m_x: np.ndarray
    rate: np.ndarray
    freq: np.ndarray
    f_es: np.ndarray
    delay: np.ndarray
    metric: np.ndarray
    p_cpu: np.ndarray
    p_tr: np.ndarray
    p_es: np.ndarray
    queue_t: np.ndarray
    queue_u: np.ndarray
    blocked: np.ndarray
    gain: np.ndarray
    d_cpu: np.ndarray
    d_tr: np.ndarray
    d_es: np.ndarray
    f_c: float
    overrun: np.ndarray


_ARRAY_FIELDS = list(kernels.COLUMNS)
_COL = {name: i for i, name in enumerate(kernels.COLUMNS)}


class Trace:
    """Per-slot, per-device record of a run.

    Stored as a list of ``(n, K, C)`` blocks; ``trace[name]`` returns the
    ``(n_slots, K)`` array of one column (``"f_c"`` is ``(n_slots,)``).
    """

    def __init__(self, k: int, mode: str, device_ids):
        self.k = k
        self.mode = mode
        self.device_ids = list(device_ids)
        self.n = 0
        self._blocks: list[np.ndarray] = []
        self._f_c: list[np.ndarray] = []
        self._data: np.ndarray | None = None
        self._fc_all: np.ndarray | None = None

    def extend(self, block: np.ndarray, f_c: np.ndarray):
        self._blocks.append(block)
        self._f_c.append(f_c)
        self.n += block.shape[0]
        self._data = None

    def append(self, rec: SlotRecord):
        row = np.empty((1, self.k, len(_ARRAY_FIELDS)))
        for name, i in _COL.items():
            row[0, :, i] = getattr(rec, name)
        self.extend(row, np.array([rec.f_c]))

    def truncate(self, n: int):
        """Drop every slot from index ``n`` on."""
        if n >= self.n:
            return
        data, fc = self._all()
        self._blocks, self._f_c = [data[:n].copy()], [fc[:n].copy()]
        self.n = n
        self._data = None

    def _all(self):
        if self._data is None:
            if self._blocks:
                self._data = np.concatenate(self._blocks) if len(self._blocks) > 1 else self._blocks[0]
                self._fc_all = np.concatenate(self._f_c)
            else:
                self._data = np.zeros((0, self.k, len(_ARRAY_FIELDS)))
                self._fc_all = np.zeros(0)
            self._blocks, self._f_c = [self._data], [self._fc_all]
        return self._data, self._fc_all

    def __getitem__(self, name: str) -> np.ndarray:
        data, fc = self._all()
        if name == "f_c":
            return fc
        return data[:, :, _COL[name]]

    def __len__(self):
        return self.n

    def queues(self) -> np.ndarray:
        """``(n_slots, 2K)``: all T queues then all U queues."""
        return np.hstack([self["queue_t"], self["queue_u"]])

    def write_csv(self, fh, chunk: int = 2048) -> None:
        """Rows ordered by ``(t, device)``; floats written with ``repr``
        (shortest exact round-trip), ``m_x`` left empty in GIB mode."""
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        order = ["beta_or_ms", "m_x", "rate", "freq", "f_es", "delay", "metric",
                 "p_cpu", "p_tr", "p_es", "queue_t", "queue_u"]
        data, _ = self._all()
        k = self.k
        devs = [str(d) for d in self.device_ids]
        for start in range(0, self.n, chunk):
            part = data[start:start + chunk]
            m = part.shape[0]
            cols = [[str(t) for t in range(start, start + m) for _ in range(k)], devs * m]
            for name in order:
                if name == "m_x" and self.mode == "gib":
                    cols.append([""] * (m * k))
                else:
                    cols.append(list(map(repr, part[:, :, _COL[name]].ravel().tolist())))
            cols.append([str(int(b)) for b in part[:, :, _COL["blocked"]].ravel().tolist()])
            fh.write("".join(",".join(row) + "\n" for row in zip(*cols)))

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


@dataclass(frozen=True)
class RunSummary:
    convergence_slot: int | None
    window: tuple[int, int]
    p_total: float
    p_ed: float
    p_es: float
    d_avg: tuple[float, ...]
    g_avg: tuple[float, ...]
    feasible: bool
    diverged: bool
    slots_run: int
    overrun_slots: int = 0
    blocked_slots: int = 0
    targets_d: tuple[float, ...] = field(default=(), repr=False)
    targets_g: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        """Flat ``key = value`` block."""
        lines = []
        for key, val in self.to_dict().items():
            if isinstance(val, (list, tuple)):
                val = " ".join(repr(float(x)) if isinstance(x, float) else repr(x) for x in val)
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"

    @property
    def constraint_ratios(self) -> tuple[np.ndarray, np.ndarray]:
        """Achieved-over-target ratios for delay and metric per device."""
        return (np.asarray(self.d_avg) / np.asarray(self.targets_d),
                np.asarray(self.g_avg) / np.asarray(self.targets_g))


def _first_converged(cs: np.ndarray, lo: int, hi: int, w: int, tol: float) -> int | None:
    """Smallest ``n`` in ``[lo, hi]`` passing the window test on prefix sums ``cs``."""
    if hi < lo:
        return None
    ends = np.arange(lo, hi + 1)
    m1 = (cs[ends - w] - cs[ends - 2 * w]) / w
    m2 = (cs[ends] - cs[ends - w]) / w
    diff = np.abs(m2 - m1)
    ok = np.all((diff < tol * np.maximum(np.abs(m1), np.abs(m2))) | (diff == 0.0), axis=1)
    hits = np.flatnonzero(ok)
    return int(ends[hits[0]]) if hits.size else None


def _prefix(q: np.ndarray, last: np.ndarray) -> np.ndarray:
    # sequential accumulation, so block-wise and one-shot sums agree bit for bit
    return np.cumsum(np.vstack([last[None, :], q]), axis=0)[1:]


def detect_convergence(queues, window: int = 500, tol: float = 1e-3) -> int | None:
    """Slot count ``n`` at which the test first passes, or ``None``.

    The test compares, for every queue, the means over ``[n-2w, n-w)``
    and ``[n-w, n)``: their difference must be below ``tol`` times the
    larger magnitude (or exactly zero).  ``queues`` has shape
    ``(n_slots, n_queues)``.
    """
    if window < 100:
        raise ValueError("window must be at least 100 slots")
    q = np.asarray(queues, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    cs = np.vstack([np.zeros((1, q.shape[1])), _prefix(q, np.zeros(q.shape[1]))])
    return _first_converged(cs, 2 * window, q.shape[0], window, tol)


class Simulator:
    """Holds the static, precomputed state of a scenario and steps slots.

    ``threads`` parallelises the per-device precomputation (GIB rate
    tables); per-slot solves are vectorised across devices, so results do
    not depend on it.
    """

    def __init__(self, scenario: Scenario, threads: int = 1):
        self.sc = scenario
        devs = scenario.devices
        self.ids = [d.id for d in devs]
        self.k = len(devs)
        abg = scenario.channel
        self.pathloss = np.array([pathloss_db(d.distance_m, d.radio.carrier_freq, abg) for d in devs])
        self.ed = EdParams.build(
            bandwidth=[d.radio.bandwidth for d in devs],
            noise_psd=[d.radio.noise_psd for d in devs],
            max_tx_power=[d.radio.max_tx_power for d in devs],
            f_max=[d.cpu.f_max for d in devs],
            eta=[d.cpu.eta for d in devs],
            rho=[d.cpu.rho for d in devs],
            # the CPU-power weight only exists in GIB mode
            gamma=[d.weights.gamma if scenario.mode == "gib" else 1.0 for d in devs],
        )
        self.eps = np.array([d.weights.epsilon for d in devs])
        self.nu = np.array([d.weights.nu for d in devs])
        self.d_target = np.array([d.targets.d_avg for d in devs])
        self.g_target = np.array([d.targets.g_avg for d in devs])
        self.d_penalty = scenario.delay_penalty_factor * self.d_target
        self.streams = DeviceStreams(scenario.seed)
        if scenario.mode == "gib":
            sources = [d.source for d in devs]
            with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
                tables = list(pool.map(gib.rate_table, sources))
            self.gib_points = tables
            self.table = GibTable.from_points(
                tables, [s.dim_x for s in sources], [s.dim_y for s in sources]
            )
            self.w_es_max = float(max(s.dim_y * s.d_min for s in sources))
            self.rho_es = np.asarray(scenario.server.rho_es, dtype=float)
            self.table_len = np.array([len(t) for t in tables], dtype=np.int64)
        else:
            grid = np.linspace(np.log(scenario.surrogate.m_min), 0.0, SCAN_POINTS)
            grid[-1] = 0.0
            self.log_ms_grid = grid

    def channel(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        z, e = self.streams.draws_many("channel", self.ids, t)
        h = gain_from_draws(self.pathloss, z, e, self.sc.channel)
        ed = self.ed
        r_max = ed.bandwidth * np.log2(1.0 + ed.max_tx_power * h / (ed.noise_psd * ed.bandwidth))
        return h, r_max

    def _finish(self, t, state, h, dec_rate, dec_freq, n_bits, w_ops, d_es, metric, blocked,
                p_es_share, f_es, f_c, setting, m_x):
        ed = self.ed
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d_cpu = np.where(w_ops > 0, w_ops / (dec_freq * ed.rho), 0.0)
            d_tr = np.where(n_bits > 0, n_bits / dec_rate, 0.0)
            p_tr = np.where(
                dec_rate > 0,
                ed.bandwidth * ed.noise_psd / h * np.expm1(dec_rate * LN2 / ed.bandwidth),
                0.0,
            )
        delay = d_cpu + d_tr + d_es
        stalled = blocked | ~np.isfinite(delay)
        delay = np.where(stalled, self.d_penalty, delay)
        p_cpu = ed.eta * dec_freq**3
        t_new = update_queue(state.t_queue, delay, self.d_target, self.eps)
        u_new = update_queue(state.u_queue, metric, self.g_target, self.nu)
        state.t_queue, state.u_queue = t_new, u_new
        return SlotRecord(
            t=t, beta_or_ms=setting, m_x=m_x, rate=dec_rate, freq=dec_freq, f_es=f_es,
            delay=delay, metric=metric, p_cpu=p_cpu, p_tr=np.where(blocked, 0.0, p_tr),
            p_es=p_es_share, queue_t=t_new.copy(), queue_u=u_new.copy(), blocked=stalled,
            gain=h, d_cpu=d_cpu, d_tr=d_tr, d_es=d_es, f_c=f_c,
            overrun=delay > self.sc.slot_duration,
        )

    def slot_step(self, t: int, state: VirtualQueueState) -> SlotRecord:
        """Advance one slot; ``state`` is updated in place and echoed in the record."""
        h, r_max = self.channel(t)
        e_t = self.eps * state.t_queue
        nu_u = self.nu * state.u_queue
        v = self.sc.v
        if self.sc.mode == "gib":
            dec = solve_ed_gib(e_t, nu_u, h, r_max, v, self.ed, self.table)
            srv = self.sc.server
            es = solve_es(e_t, self.w_es_max, self.rho_es, v, srv.eta, srv.f_c_max)
            with np.errstate(divide="ignore", invalid="ignore"):
                d_es = np.where(dec.w_es > 0, dec.w_es / (es.f_es * self.rho_es), 0.0)
            p_es = srv.eta * es.f_c**3
            total_f = es.f_es.sum()
            share = p_es * es.f_es / total_f if total_f > 0 else np.zeros(self.k)
            return self._finish(t, state, h, dec.rate, dec.freq, dec.n_bits, dec.w_ops, d_es,
                                dec.nmse, dec.blocked, share, es.f_es, es.f_c, dec.beta,
                                np.full(self.k, np.nan))
        st = self.sc.surrogate
        dec = solve_ed_sqgan(e_t, nu_u, h, r_max, v, self.ed, st.params, st.mode, st.m_min)
        metric = dec.metric
        if st.metric_noise_std > 0:
            noise, _ = self.streams.draws_many("metric", self.ids, t)
            metric = np.maximum(metric + st.metric_noise_std * noise, 0.0)
        zeros = np.zeros(self.k)
        return self._finish(t, state, h, dec.rate, dec.freq, dec.n_bits, dec.w_ops, zeros,
                            metric, dec.blocked, zeros, zeros, 0.0, dec.m_s, dec.m_x)

    def channel_block(self, start: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Gains and max rates for slots ``start .. start+n-1`` as ``(n, K)``;
        the span must not cross a stream block."""
        block, off = divmod(start, STREAM_BLOCK)
        if off + n > STREAM_BLOCK:
            raise ValueError("span crosses a stream block")
        z, e = self.streams.block_many("channel", self.ids, block)
        z, e = z[:, off:off + n].T, e[:, off:off + n].T
        h = gain_from_draws(self.pathloss, z, e, self.sc.channel)
        ed = self.ed
        r_max = ed.bandwidth * np.log2(1.0 + ed.max_tx_power * h / (ed.noise_psd * ed.bandwidth))
        return np.ascontiguousarray(h), np.ascontiguousarray(r_max)

    def _advance(self, state: VirtualQueueState, start: int, n: int, engine: str):
        if engine == "numpy":
            recs = [self.slot_step(t, state) for t in range(start, start + n)]
            tmp = Trace(self.k, self.sc.mode, self.ids)
            for r in recs:
                tmp.append(r)
            return tmp._all()
        if engine != "compiled":
            raise ValueError(f"unknown engine {engine!r}")
        h, r_max = self.channel_block(start, n)
        out = np.zeros((n, self.k, len(_ARRAY_FIELDS)))
        f_c = np.zeros(n)
        ed, sc = self.ed, self.sc
        common = (self.eps, self.nu, self.d_target, self.g_target, self.d_penalty, float(sc.v),
                  ed.bandwidth, ed.noise_psd)
        if sc.mode == "gib":
            tb = self.table
            kernels.gib_block(
                out, f_c, state.t_queue, state.u_queue, h, r_max, *common,
                ed.gamma, ed.eta, ed.rho, ed.f_max,
                tb.beta, tb.n_bits, tb.w_ops, tb.w_es, tb.nmse, self.table_len,
                self.w_es_max, self.rho_es, float(sc.server.eta), float(sc.server.f_c_max),
                float(sc.slot_duration),
            )
        else:
            st = sc.surrogate
            if st.metric_noise_std > 0:
                block, off = divmod(start, STREAM_BLOCK)
                noise = np.ascontiguousarray(
                    self.streams.block_many("metric", self.ids, block)[0][:, off:off + n].T
                )
            else:
                noise = np.zeros((n, self.k))
            kernels.sqgan_block(
                out, state.t_queue, state.u_queue, h, r_max, noise, float(st.metric_noise_std),
                *common, ed.eta, ed.rho, ed.f_max,
                st.params.a, st.params.b, st.params.c, st.mode == "paper", float(st.m_min),
                self.log_ms_grid, GOLDEN_LOG_TOL, float(sc.slot_duration),
            )
        return out, f_c

    def run(self, engine: str = "compiled") -> tuple[Trace, RunSummary]:
        """Step until the queues converge, then for ``summary_window`` more slots.

        Slots are advanced in blocks; convergence, divergence and the stop
        slot are then located exactly, so the result equals a slot-by-slot
        loop.  ``engine="numpy"`` uses the vectorised reference solvers.
        """
        sc = self.sc
        k = self.k
        state = VirtualQueueState.zeros(k)
        trace = Trace(k, sc.mode, self.ids)
        w, tol = sc.conv_window, sc.conv_tol
        limits = np.concatenate([sc.divergence_factor * self.eps * self.d_target,
                                 sc.divergence_factor * self.nu * self.g_target])
        cs = [np.zeros((1, 2 * k))]
        last = np.zeros(2 * k)
        conv = None
        diverged = False
        stop = sc.max_slots
        n_done = 0
        while n_done < stop and not diverged:
            n = min(STREAM_BLOCK - n_done % STREAM_BLOCK, stop - n_done)
            block, f_c = self._advance(state, n_done, n, engine)
            q = np.concatenate([block[:, :, _COL["queue_t"]], block[:, :, _COL["queue_u"]]], axis=1)
            end = n
            bad = np.flatnonzero(np.any(q > limits, axis=1))
            if bad.size:
                diverged = True
                end = int(bad[0]) + 1
            part = _prefix(q[:end], last)
            cs.append(part)
            last = part[-1]
            if conv is None:
                prefix = np.concatenate(cs) if len(cs) > 1 else cs[0]
                cs = [prefix]
                # a slot that diverges is never tested for convergence
                conv = _first_converged(prefix, max(2 * w, n_done + 1),
                                        n_done + end - (1 if diverged else 0), w, tol)
                if conv is not None:
                    stop = min(sc.max_slots, conv + sc.summary_window)
            if stop < n_done + end:
                end = stop - n_done
            trace.extend(block[:end], f_c[:end])
            n_done += end
        end = len(trace)
        if conv is not None and not diverged and end - conv >= 1:
            start = conv
        else:
            start = max(0, end - sc.summary_window)
        return trace, summarize(trace, start, end, self, conv, diverged)


def summarize(trace: Trace, start: int, stop: int, sim: Simulator, conv, diverged) -> RunSummary:
    sl = slice(start, stop)
    gamma = sim.ed.gamma
    p_cpu, p_tr, p_es = trace["p_cpu"][sl], trace["p_tr"][sl], trace["p_es"][sl]
    p_ed = float(np.mean(np.sum(p_cpu + p_tr, axis=1)))
    p_es_mean = float(np.mean(np.sum(p_es, axis=1)))
    p_total = float(np.mean(np.sum(gamma * p_cpu + p_tr + p_es, axis=1)))
    complete = conv is not None and not diverged and stop - start >= sim.sc.summary_window
    return RunSummary(
        convergence_slot=conv,
        window=(start, stop),
        p_total=p_total,
        p_ed=p_ed,
        p_es=p_es_mean,
        d_avg=tuple(float(x) for x in np.mean(trace["delay"][sl], axis=0)),
        g_avg=tuple(float(x) for x in np.mean(trace["metric"][sl], axis=0)),
        feasible=bool(complete),
        diverged=diverged,
        slots_run=len(trace),
        overrun_slots=int(np.count_nonzero(np.any(trace["overrun"] > 0, axis=1))),
        blocked_slots=int(np.count_nonzero(np.any(trace["blocked"] > 0, axis=1))),
        targets_d=tuple(float(x) for x in sim.d_target),
        targets_g=tuple(float(x) for x in sim.g_target),
    )


def run(scenario: Scenario, threads: int = 1) -> tuple[Trace, RunSummary]:
    return Simulator(scenario, threads=threads).run()


SWEEP_AXES = ("d_avg", "g_avg", "gamma", "v")


def _sweep_point(scenario: Scenario, point: dict) -> dict:
    row = dict(point)
    try:
        _, s = run(scenario.with_overrides(**point))
    except Exception as exc:  # per-point failures are recorded, the sweep goes on
        row.update(status=f"error: {type(exc).__name__}: {exc}")
        return row
    d_ratio, g_ratio = s.constraint_ratios
    row.update(
        status="ok" if s.feasible else "infeasible",
        convergence_slot=s.convergence_slot,
        feasible=s.feasible,
        p_total=s.p_total,
        p_ed=s.p_ed,
        p_es=s.p_es,
        d_avg_mean=float(np.mean(s.d_avg)),
        g_avg_mean=float(np.mean(s.g_avg)),
        d_ratio_max=float(np.max(d_ratio)),
        g_ratio_max=float(np.max(g_ratio)),
    )
    return row


def sweep(scenario: Scenario, grid: dict, threads: int = 1) -> list[dict]:
    """One run per point of the Cartesian product of ``grid`` axes.

    Valid axes are ``d_avg``, ``g_avg``, ``gamma`` and ``v``; they override
    the value of every device (or the network ``V``).  Rows come back in
    grid order whatever the thread count.
    """
    unknown = set(grid) - set(SWEEP_AXES)
    if unknown:
        raise ConfigError("sweep", f"unknown sweep axes {sorted(unknown)}")
    axes = [a for a in SWEEP_AXES if a in grid]
    values = [list(grid[a]) for a in axes]
    if not axes or any(len(v) == 0 for v in values):
        raise ConfigError("sweep", "empty sweep grid")
    points = [dict(zip(axes, combo)) for combo in itertools.product(*values)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda p: _sweep_point(scenario, p), points))
