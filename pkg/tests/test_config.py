from pathlib import Path

import numpy as np
import pytest

from goedge import config
from goedge.errors import ConfigError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL = """
[scenario]
mode = "gib"
seed = 7

[lyapunov]
V = 5.0

[server]
f_c_max = 1e9
eta = 1e-27
rho_es = [4.0, 2.0]

[device_defaults.cpu]
f_max = 1e9
eta = 1e-27
rho = 4.0

[device_defaults.radio]
bandwidth = 1e3
noise_psd_dbm = -174.0
max_tx_power_dbm = 20.0

[device_defaults.targets]
d_avg = 1e-3
g_avg = 0.5

[[devices]]
id = 0
distance_m = 50.0
source = { kind = "explicit", cov_x = [[1.0]], cov_y = [[1.0]], cov_xy = [[0.8]] }

[[devices]]
id = 1
distance_m = 80.0
targets = { g_avg = 0.7 }
source = { kind = "synthetic", dim_x = 6, dim_y = 2, seed = 3 }
"""


def test_minimal_scenario_defaults_and_conversions():
    sc, res = config.loads(MINIMAL)
    assert sc.mode == "gib" and sc.seed == 7 and sc.v == 5.0 and sc.k == 2
    assert sc.max_slots == 200_000 and sc.summary_window == 1000
    assert (sc.conv_window, sc.conv_tol) == (500, 1e-3)
    r = sc.devices[0].radio
    assert r.noise_psd == pytest.approx(3.981e-21, rel=1e-3)
    assert r.max_tx_power == pytest.approx(0.1, rel=1e-12)
    assert sc.devices[1].targets.d_avg == 1e-3 and sc.devices[1].targets.g_avg == 0.7
    assert sc.devices[0].targets.g_avg == 0.5
    assert sc.devices[0].source.cov_xy[0, 0] == 0.8
    assert sc.devices[1].source.dim_x == 6
    assert sc.server.rho_es == (4.0, 2.0)
    assert sc.channel.fading and sc.channel.shadow_sigma_db == 7.6
    assert "noise_psd_dbm" not in res["devices"][0]["radio"]


def test_round_trip_is_identical():
    sc, res = config.loads(MINIMAL)
    sc2, res2 = config.loads(config.dumps(res))
    assert res2 == res
    assert config.dumps(res2) == config.dumps(res)
    assert sc2.devices[1].source.joint_cov.tolist() == sc.devices[1].source.joint_cov.tolist()
    assert dict((k, v) for k, v in vars(sc2).items() if k != "devices") == \
        dict((k, v) for k, v in vars(sc).items() if k != "devices")


@pytest.mark.parametrize("name", ["gib_demo", "gamma_sweep", "sqgan_demo"])
def test_shipped_scenarios_round_trip(name):
    sc, res = config.load(SCENARIOS / f"{name}.toml")
    assert config.loads(config.dumps(res))[1] == res
    assert sc.k == 10


def test_scalar_rho_es_broadcast():
    text = MINIMAL.replace("rho_es = [4.0, 2.0]", "rho_es = 3.0")
    assert config.loads(text)[0].server.rho_es == (3.0, 3.0)


@pytest.mark.parametrize("edit, path", [
    (("seed = 7\n", ""), "scenario.seed"),
    (("V = 5.0", "V_typo = 5.0"), "lyapunov.V_typo"),
    (("bandwidth = 1e3\n", ""), "devices[0].radio.bandwidth"),
    (("rho_es = [4.0, 2.0]", "rho_es = []"), "server.rho_es"),
    (("rho_es = [4.0, 2.0]", "rho_es = [4.0, 2.0, 1.0]"), "server.rho_es"),
    (('mode = "gib"', 'mode = "mixed"'), "scenario.mode"),
    (("id = 1", "id = 0"), "devices"),
    (("distance_m = 80.0", "distance_m = 0.5"), "devices[1].distance_m"),
    (('kind = "synthetic"', 'kind = "random"'), "devices[1].source.kind"),
    (("dim_x = 6", "dim_x = 6.5"), "devices[1].source.dim_x"),
    (("cov_xy = [[0.8]]", "cov_xy = [[1.5]]"), "devices[0].source"),
    (("max_tx_power_dbm = 20.0", "max_tx_power_dbm = 20.0\nmax_tx_power = 0.1"),
     "devices[0].radio.max_tx_power_dbm"),
    (("f_max = 1e9\n", "f_max = -1e9\n"), "devices[0].cpu.f_max"),
])
def test_errors_carry_key_path(edit, path):
    text = MINIMAL.replace(*edit, 1)
    assert text != MINIMAL
    with pytest.raises(ConfigError) as err:
        config.loads(text)
    assert err.value.path == path


def test_unknown_section_and_syntax_error():
    with pytest.raises(ConfigError) as err:
        config.loads(MINIMAL + "\n[gpu]\ncount = 1\n")
    assert err.value.path == "gpu"
    with pytest.raises(ConfigError):
        config.loads("[scenario\n")


def test_mode_specific_sections():
    with pytest.raises(ConfigError) as err:
        config.loads(MINIMAL + "\n[surrogate]\na = 0.3\n")
    assert err.value.path == "surrogate"
    sq = config.load(SCENARIOS / "sqgan_demo.toml")[1]
    sq["server"] = {"f_c_max": 1.0, "eta": 1.0, "rho_es": [1.0]}
    with pytest.raises(ConfigError):
        config.resolve(sq)


def test_sweep_section():
    _, res = config.loads(MINIMAL + "\n[sweep]\ngamma = [0.5, 1]\nv = 3\n")
    assert config.sweep_grid(res) == {"gamma": [0.5, 1.0], "v": [3.0]}
    with pytest.raises(ConfigError):
        config.loads(MINIMAL + "\n[sweep]\nbandwidth = [1.0]\n")


def test_sqgan_surrogate_settings():
    sc, _ = config.load(SCENARIOS / "sqgan_demo.toml")
    assert sc.mode == "sqgan" and sc.server is None
    assert sc.surrogate.params.a == 0.258 and sc.surrogate.mode == "stationary"
    assert all(d.source is None for d in sc.devices)
    assert np.all([d.weights.gamma == 1.0 for d in sc.devices])


def test_missing_file():
    with pytest.raises(ConfigError):
        config.load("/nonexistent/scenario.toml")
