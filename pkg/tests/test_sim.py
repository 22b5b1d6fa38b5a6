import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from goedge import gib, sim
from goedge.channel import AbgParams, RadioConfig, dbm_per_hz_to_w
from goedge.errors import ConfigError
from goedge.slotopt import LyapunovWeights

N0 = dbm_per_hz_to_w(-174.0)
SOURCE = gib.GaussianSource.synthetic(20, 4, seed=100, correlation=0.9)


def gib_scenario(k=1, d_avg=2e-4, g_avg=0.95, v=10.0, eps=60.0, fading=False, seed=1,
                 max_slots=200_000):
    devs = tuple(
        sim.EdgeDeviceConfig(
            i, 100.0 + 5 * i, sim.CpuConfig(1.8e9, 2.57e-27, 4.0), RadioConfig(1e3, N0, 0.1),
            sim.Targets(d_avg, g_avg), LyapunovWeights(eps, 1.0, 1.0), SOURCE,
        )
        for i in range(k)
    )
    return sim.Scenario(
        "gib", seed, devs, v=v, server=sim.EdgeServerConfig(1.8e9, 2.57e-27, (4.0,) * k),
        channel=AbgParams(shadow_sigma_db=7.6 if fading else 0.0, fading=fading),
        max_slots=max_slots,
    )


def sqgan_scenario(k=3, d_avg=0.02, g_avg=0.4, v=1.0, noise=0.0, max_slots=200_000):
    devs = tuple(
        sim.EdgeDeviceConfig(
            i, 20.0 + 40 * i, sim.CpuConfig(1e9, 1e-26, 16.0), RadioConfig(1e5, N0, 0.5),
            sim.Targets(d_avg, g_avg),
        )
        for i in range(k)
    )
    return sim.Scenario("sqgan", 3, devs, v=v, max_slots=max_slots,
                        surrogate=sim.SurrogateSettings(metric_noise_std=noise))


@pytest.fixture(scope="module")
def feasible_run():
    return sim.run(gib_scenario(k=2, fading=True))


# --- queues -------------------------------------------------------------------------

def test_update_queue_examples():
    assert sim.update_queue(0.0, 0.005, 0.003, 1.0) == pytest.approx(0.002, abs=1e-15)
    assert sim.update_queue(0.0, 0.001, 0.003, 1.0) == 0.0
    assert sim.update_queue(0.7, 0.003, 0.003, 2.0) == 0.7


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0, 1e3), st.floats(1e-3, 1e3))
def test_update_queue_non_negative(q, value, target, lr):
    assert sim.update_queue(q, value, target, lr) >= 0


# --- convergence detection -------------------------------------------------------------

def test_detect_convergence_constant():
    assert sim.detect_convergence(np.ones((3000, 4)), window=500) == 1000


def test_detect_convergence_linear():
    q = np.arange(5000, dtype=float)[:, None] * np.ones((1, 2)) + 1.0
    assert sim.detect_convergence(q, window=500) is None


def test_detect_convergence_zero_queue_counts_as_converged():
    q = np.zeros((1200, 2))
    assert sim.detect_convergence(q, window=500) == 1000


def test_detect_convergence_window_minimum():
    with pytest.raises(ValueError):
        sim.detect_convergence(np.ones((500, 1)), window=99)


def test_detect_convergence_matches_run(feasible_run):
    trace, summary = feasible_run
    q = trace.queues()
    assert sim.detect_convergence(q, 500, 1e-3) == summary.convergence_slot


def test_detect_convergence_stable_under_shift(feasible_run):
    trace, summary = feasible_run
    q = trace.queues()
    base = summary.convergence_slot
    later = sim.detect_convergence(q[1:], 500, 1e-3)
    assert later is not None and abs(later + 1 - base) <= 500


# --- runs ------------------------------------------------------------------------------

def test_feasible_run_meets_targets(feasible_run):
    trace, s = feasible_run
    assert s.feasible and not s.diverged
    assert s.window == (s.convergence_slot, s.convergence_slot + 1000)
    d_ratio, g_ratio = s.constraint_ratios
    assert np.all(d_ratio <= 1.02) and np.all(g_ratio <= 1.02)
    assert len(trace) == s.slots_run == s.window[1]


def test_queues_non_negative(feasible_run):
    assert np.all(feasible_run[0].queues() >= 0)


def test_feasible_run_is_stable(feasible_run):
    q = feasible_run[0].queues()
    tail = q[-len(q) // 10:]
    assert np.all(tail.max(axis=0) <= 2 * np.median(tail, axis=0))


def test_energy_accounting(feasible_run):
    trace, s = feasible_run
    sl = slice(*s.window)
    per_slot = np.sum(trace["p_cpu"][sl] + trace["p_tr"][sl] + trace["p_es"][sl], axis=1)
    assert s.p_total == pytest.approx(per_slot.mean(), rel=1e-12)
    f_c = trace["f_c"][sl]
    assert np.sum(trace["p_es"][sl], axis=1) == pytest.approx(2.57e-27 * f_c**3, rel=1e-12)


def test_trace_physical_ranges(feasible_run):
    trace, _ = feasible_run
    for col in ("delay", "p_cpu", "p_tr", "p_es", "rate", "freq", "f_es"):
        assert np.all(trace[col] >= 0), col
    assert np.all(trace["rate"] <= 1e3 * np.log2(1 + 0.1 * trace["gain"] / (N0 * 1e3)) * (1 + 1e-12))
    assert np.all(trace["f_es"].sum(axis=1) <= trace["f_c"] * (1 + 1e-9))


def test_cold_start_is_idle():
    trace, _ = sim.run(gib_scenario(max_slots=5))
    assert trace["rate"][0, 0] == 0 and trace["freq"][0, 0] == 0
    assert trace["blocked"][0, 0] == 1
    assert trace["delay"][0, 0] == pytest.approx(10 * 2e-4)
    assert trace["queue_t"][1, 0] > 0


def test_metric_target_below_floor_is_infeasible():
    floor = min(p.nmse for p in gib.rate_table(SOURCE))
    trace, s = sim.run(gib_scenario(g_avg=0.5 * floor, max_slots=20_000))
    assert not s.feasible
    u = trace["queue_u"][:, 0]
    assert u[-1] > 0.9 * (0.5 * floor) * len(u)  # grows by nu (G - G_avg) per slot
    assert u[-1] > 1.9 * u[len(u) // 2]


def test_large_v_lowers_power():
    powers = []
    for v in (10.0, 100.0, 1000.0):
        _, s = sim.run(gib_scenario(v=v))
        assert s.feasible
        powers.append(s.p_total)
    assert powers[0] >= powers[1] >= powers[2]


def test_divergence_flag():
    sc = dataclasses.replace(gib_scenario(g_avg=0.01, max_slots=50_000), divergence_factor=100.0)
    trace, s = sim.run(sc)
    assert s.diverged and not s.feasible
    q = trace.queues()
    limits = 100.0 * np.array([60.0 * 2e-4, 1.0 * 0.01])
    assert np.any(q[-1] > limits) and not np.any(q[:-1] > limits)


# --- engines and determinism -----------------------------------------------------------------

def test_gib_engines_agree():
    sim_c = sim.Simulator(gib_scenario(k=3, fading=True, max_slots=1500))
    sim_n = sim.Simulator(gib_scenario(k=3, fading=True, max_slots=1500))
    tc, sc = sim_c.run("compiled")
    tn, sn = sim_n.run("numpy")
    for col in sim.TRACE_COLUMNS[2:]:
        key = {"rate_bps": "rate", "freq_hz": "freq", "f_es_hz": "f_es", "delay_s": "delay",
               "p_cpu_w": "p_cpu", "p_tr_w": "p_tr", "p_es_w": "p_es"}.get(col, col)
        np.testing.assert_allclose(tc[key], tn[key], rtol=1e-12, atol=0, equal_nan=True, err_msg=col)
    assert sc.p_total == pytest.approx(sn.p_total, rel=1e-12)


def test_sqgan_engines_agree():
    tc, _ = sim.Simulator(sqgan_scenario(max_slots=300)).run("compiled")
    tn, _ = sim.Simulator(sqgan_scenario(max_slots=300)).run("numpy")
    for key in ("beta_or_ms", "m_x", "rate", "freq", "delay", "metric", "p_cpu", "p_tr",
                "queue_t", "queue_u"):
        np.testing.assert_allclose(tc[key], tn[key], rtol=1e-6, atol=1e-12, err_msg=key)


def test_slot_step_matches_run():
    s = sim.Simulator(gib_scenario(k=2, fading=True, max_slots=50))
    trace, _ = s.run()
    state = sim.VirtualQueueState.zeros(2)
    for t in range(50):
        rec = s.slot_step(t, state)
        assert np.allclose(rec.queue_t, trace["queue_t"][t], rtol=1e-12, atol=0)
        assert np.allclose(rec.delay, trace["delay"][t], rtol=1e-12, atol=0)


def test_metric_noise_is_reproducible():
    a, _ = sim.run(sqgan_scenario(noise=0.01, max_slots=2000))
    b, _ = sim.run(sqgan_scenario(noise=0.01, max_slots=2000))
    c, _ = sim.run(sqgan_scenario(noise=0.0, max_slots=2000))
    assert a.to_csv_text() == b.to_csv_text()
    assert not np.array_equal(a["metric"], c["metric"])


def test_trace_csv_threads_identical():
    sc = gib_scenario(k=3, fading=True, max_slots=3000)
    assert sim.run(sc, threads=1)[0].to_csv_text() == sim.run(sc, threads=8)[0].to_csv_text()


def test_trace_csv_layout():
    trace, _ = sim.run(gib_scenario(k=2, max_slots=3))
    lines = trace.to_csv_text().split("\n")
    assert lines[0] == ",".join(sim.TRACE_COLUMNS)
    assert len(lines) == 1 + 3 * 2 + 1 and lines[-1] == ""
    first = lines[1].split(",")
    assert first[:2] == ["0", "0"] and first[3] == ""  # m_x is empty in GIB mode


# --- drift bound ------------------------------------------------------------------------------

def test_drift_bound_holds_on_random_slots(feasible_run):
    trace, _ = feasible_run
    eps, nu, d_avg, g_avg = 60.0, 1.0, 2e-4, 0.95
    delay, metric = trace["delay"], trace["metric"]
    # the bound needs |D - D_avg| <= D_max - D_avg, so D_max is the realised worst deviation
    d_max = d_avg + np.abs(delay - d_avg).max()
    g_max = g_avg + np.abs(metric - g_avg).max()
    rng = np.random.default_rng(0)
    for t in rng.integers(1, len(trace), 500):
        before = sim.VirtualQueueState(trace["queue_t"][t - 1], trace["queue_u"][t - 1])
        after = sim.VirtualQueueState(trace["queue_t"][t], trace["queue_u"][t])
        drift = sim.lyapunov(after) - sim.lyapunov(before)
        bound = sim.drift_bound(before, delay[t], metric[t], eps, nu, d_avg, g_avg, d_max, g_max)
        assert drift <= bound + 1e-12 * max(1.0, abs(bound))


# --- sweep and scenario helpers ------------------------------------------------------------------

def test_sweep_single_point_equals_run():
    sc = gib_scenario(k=2, fading=True)
    rows = sim.sweep(sc, {"v": [10.0]})
    _, s = sim.run(sc)
    assert len(rows) == 1
    r = rows[0]
    assert r["status"] == "ok" and r["convergence_slot"] == s.convergence_slot
    assert r["p_total"] == s.p_total and r["p_es"] == s.p_es
    assert r["d_avg_mean"] == float(np.mean(s.d_avg))


def test_sweep_grid_product_and_errors():
    sc = gib_scenario(max_slots=2000)
    rows = sim.sweep(sc, {"d_avg": [2e-4, 3e-4], "g_avg": [0.9, 0.95, -1.0]})
    assert len(rows) == 6
    assert [(r["d_avg"], r["g_avg"]) for r in rows][:3] == [(2e-4, 0.9), (2e-4, 0.95), (2e-4, -1.0)]
    assert rows[2]["status"].startswith("error")
    with pytest.raises(ConfigError):
        sim.sweep(sc, {})
    with pytest.raises(ConfigError):
        sim.sweep(sc, {"bandwidth": [1.0]})


def test_scenario_validation():
    with pytest.raises(ConfigError):
        dataclasses.replace(gib_scenario(), mode="other")
    with pytest.raises(ConfigError):
        dataclasses.replace(gib_scenario(), server=None)
    with pytest.raises(ConfigError):
        dataclasses.replace(gib_scenario(), conv_window=50)


def test_summary_text_and_dict(feasible_run):
    _, s = feasible_run
    text = s.to_text()
    assert f"p_total = {s.p_total!r}" in text
    assert s.to_dict()["convergence_slot"] == s.convergence_slot
