"""Scenario files: TOML parsing, validation and canonical echo.

A scenario file has the sections ``scenario``, ``lyapunov``, ``channel``,
``server`` (GIB mode), ``surrogate`` (SQ-GAN mode), an optional
``device_defaults`` table merged under every entry of ``devices``, and an
optional ``sweep`` table.  Units are Hz, W, seconds and bits; the only
exceptions are ``max_tx_power_dbm`` (dBm) and ``noise_psd_dbm`` (dBm/Hz),
which are converted to W and W/Hz on load.

``load`` returns the :class:`~goedge.sim.Scenario` together with the fully
resolved document (defaults filled in, ``device_defaults`` expanded, dBm
converted).  ``dumps`` of that document re-parses to the same document,
which is what ``goedge validate`` prints.
"""

from __future__ import annotations

import copy
import math
import sys
from pathlib import Path

import tomli_w

from . import gib
from . import surrogate as sg
from .channel import AbgParams, RadioConfig, dbm_per_hz_to_w
from .errors import ConfigError
from .sim import (
    CpuConfig,
    EdgeDeviceConfig,
    EdgeServerConfig,
    Scenario,
    SurrogateSettings,
    SWEEP_AXES,
    Targets,
)
from .slotopt import LyapunovWeights

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

REQUIRED = object()

# (default, kind); kind is "float", "int", "str", "bool", "floats" or "matrix"
SCENARIO_KEYS = {
    "mode": (REQUIRED, "str"),
    "seed": (REQUIRED, "int"),
    "max_slots": (200_000, "int"),
    "summary_window": (1000, "int"),
    "delay_penalty_factor": (10.0, "float"),
    "divergence_factor": (1e6, "float"),
    "slot_duration": (1.0, "float"),
}
CONVERGENCE_KEYS = {"window": (500, "int"), "tol": (1e-3, "float")}
LYAPUNOV_KEYS = {"V": (REQUIRED, "float")}
CHANNEL_KEYS = {
    "path_exponent": (3.5, "float"),
    "offset_db": (24.4, "float"),
    "freq_exponent": (1.9, "float"),
    "shadow_sigma_db": (7.6, "float"),
    "fading": ("rayleigh", "str"),
    "ref_distance_m": (1.0, "float"),
    "ref_freq_hz": (1e9, "float"),
}
SERVER_KEYS = {
    "f_c_max": (REQUIRED, "float"),
    "eta": (REQUIRED, "float"),
    "rho_es": (REQUIRED, "floats"),
}
SURROGATE_KEYS = {
    "a": (sg.DEFAULT_PARAMS.a, "float"),
    "b": (sg.DEFAULT_PARAMS.b, "float"),
    "c": (sg.DEFAULT_PARAMS.c, "float"),
    "mode": ("stationary", "str"),
    "m_min": (sg.M_MIN, "float"),
    "metric_noise_std": (0.0, "float"),
}
DEVICE_KEYS = {"id": (REQUIRED, "int"), "distance_m": (REQUIRED, "float")}
CPU_KEYS = {
    "f_max": (REQUIRED, "float"),
    "eta": (REQUIRED, "float"),
    "rho": (REQUIRED, "float"),
    "p_cpu_max": (None, "float"),
}
RADIO_KEYS = {
    "bandwidth": (REQUIRED, "float"),
    "noise_psd": (REQUIRED, "float"),
    "max_tx_power": (REQUIRED, "float"),
    "carrier_freq": (1e9, "float"),
}
# alternative spellings in dBm, converted to the canonical key
DBM_ALIASES = {
    "noise_psd_dbm": ("noise_psd", dbm_per_hz_to_w),
    "max_tx_power_dbm": ("max_tx_power", lambda dbm: 10.0 ** ((dbm - 30.0) / 10.0)),
}
TARGET_KEYS = {"d_avg": (REQUIRED, "float"), "g_avg": (REQUIRED, "float")}
WEIGHT_KEYS = {"epsilon": (1.0, "float"), "nu": (1.0, "float"), "gamma": (1.0, "float")}
SYNTH_KEYS = {
    "kind": (REQUIRED, "str"),
    "dim_x": (REQUIRED, "int"),
    "dim_y": (REQUIRED, "int"),
    "seed": (REQUIRED, "int"),
    "correlation": (0.8, "float"),
}
EXPLICIT_KEYS = {
    "kind": (REQUIRED, "str"),
    "cov_x": (REQUIRED, "matrix"),
    "cov_y": (REQUIRED, "matrix"),
    "cov_xy": (REQUIRED, "matrix"),
}
SWEEP_KEYS = {axis: (None, "floats") for axis in SWEEP_AXES}
TOP_KEYS = {"scenario", "lyapunov", "channel", "server", "surrogate", "device_defaults", "devices", "sweep"}


def _coerce(value, kind: str, path: str):
    def num(v, p):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(p, f"expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(p, "must be finite")
        return v

    if kind == "float":
        return num(value, path)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if kind == "floats":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [num(value, path)]
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a number or a list of numbers, got {value!r}")
        return [num(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if kind == "matrix":
        if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
            raise ConfigError(path, "expected a list of rows")
        return [[num(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(value)]
    raise AssertionError(kind)


def _table(raw, spec: dict, path: str, aliases: dict | None = None) -> dict:
    """Check one table against ``spec``; returns a new dict with defaults filled."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a table")
    raw = dict(raw)
    for alias, (target, convert) in (aliases or {}).items():
        if alias in raw:
            if target in raw:
                raise ConfigError(f"{path}.{alias}", f"conflicts with {target}")
            raw[target] = convert(_coerce(raw.pop(alias), "float", f"{path}.{alias}"))
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}", "unknown key")
    out = {}
    for key, (default, kind) in spec.items():
        sub = f"{path}.{key}"
        if key in raw:
            out[key] = _coerce(raw[key], kind, sub)
        elif default is REQUIRED:
            raise ConfigError(sub, "missing required key")
        elif default is not None:
            out[key] = default
    return out


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "source":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _source(raw, path: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a table")
    kind = raw.get("kind")
    if kind == "synthetic":
        return _table(raw, SYNTH_KEYS, path)
    if kind == "explicit":
        return _table(raw, EXPLICIT_KEYS, path)
    raise ConfigError(f"{path}.kind", "must be 'synthetic' or 'explicit'")


def _device(raw, mode: str, path: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a table")
    subtables = {"cpu", "radio", "targets", "weights", "source"}
    out = _table({k: v for k, v in raw.items() if k not in subtables}, DEVICE_KEYS, path)
    for name, spec in (("cpu", CPU_KEYS), ("radio", RADIO_KEYS), ("targets", TARGET_KEYS)):
        if name not in raw:
            raise ConfigError(f"{path}.{name}", "missing required table")
        out[name] = _table(raw[name], spec, f"{path}.{name}", DBM_ALIASES if name == "radio" else None)
    out["weights"] = _table(raw.get("weights"), WEIGHT_KEYS, f"{path}.weights")
    if mode == "gib":
        if "source" not in raw:
            raise ConfigError(f"{path}.source", "missing required table (GIB mode)")
        out["source"] = _source(raw["source"], f"{path}.source")
    elif "source" in raw:
        raise ConfigError(f"{path}.source", "only allowed in GIB mode")
    return out


def resolve(doc: dict) -> dict:
    """Validate a raw document and return its canonical, fully explicit form."""
    if not isinstance(doc, dict):
        raise ConfigError("", "configuration must be a table")
    unknown = sorted(set(doc) - TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    if "scenario" not in doc:
        raise ConfigError("scenario", "missing required table")
    scen_raw = dict(doc["scenario"]) if isinstance(doc["scenario"], dict) else doc["scenario"]
    if not isinstance(scen_raw, dict):
        raise ConfigError("scenario", "expected a table")
    conv_raw = scen_raw.pop("convergence", None)
    out = {"scenario": _table(scen_raw, SCENARIO_KEYS, "scenario")}
    out["scenario"]["convergence"] = _table(conv_raw, CONVERGENCE_KEYS, "scenario.convergence")
    mode = out["scenario"]["mode"]
    if mode not in ("gib", "sqgan"):
        raise ConfigError("scenario.mode", f"must be 'gib' or 'sqgan', got {mode!r}")
    if "lyapunov" not in doc:
        raise ConfigError("lyapunov", "missing required table")
    out["lyapunov"] = _table(doc["lyapunov"], LYAPUNOV_KEYS, "lyapunov")
    out["channel"] = _table(doc.get("channel"), CHANNEL_KEYS, "channel")
    if out["channel"]["fading"] not in ("rayleigh", "none"):
        raise ConfigError("channel.fading", "must be 'rayleigh' or 'none'")
    if mode == "gib":
        if "server" not in doc:
            raise ConfigError("server", "missing required table (GIB mode)")
        out["server"] = _table(doc["server"], SERVER_KEYS, "server")
        if "surrogate" in doc:
            raise ConfigError("surrogate", "only allowed in SQ-GAN mode")
    else:
        if "server" in doc:
            raise ConfigError("server", "only allowed in GIB mode")
        out["surrogate"] = _table(doc.get("surrogate"), SURROGATE_KEYS, "surrogate")
        if out["surrogate"]["mode"] not in ("stationary", "paper"):
            raise ConfigError("surrogate.mode", "must be 'stationary' or 'paper'")
    defaults = doc.get("device_defaults", {})
    if not isinstance(defaults, dict):
        raise ConfigError("device_defaults", "expected a table")
    devices = doc.get("devices")
    if not isinstance(devices, list) or not devices:
        raise ConfigError("devices", "missing required array of device tables")
    out["devices"] = [
        _device(_merge(defaults, d) if isinstance(d, dict) else d, mode, f"devices[{i}]")
        for i, d in enumerate(devices)
    ]
    ids = [d["id"] for d in out["devices"]]
    if len(set(ids)) != len(ids):
        raise ConfigError("devices", "device ids must be unique")
    if mode == "gib":
        rho = out["server"]["rho_es"]
        if len(rho) == 1:
            out["server"]["rho_es"] = rho * len(ids)
        elif len(rho) != len(ids):
            raise ConfigError("server.rho_es", "need one value or one per device")
    if "sweep" in doc:
        out["sweep"] = _table(doc["sweep"], SWEEP_KEYS, "sweep")
    return out


def _build_source(spec: dict, path: str) -> gib.GaussianSource:
    try:
        if spec["kind"] == "synthetic":
            return gib.GaussianSource.synthetic(
                spec["dim_x"], spec["dim_y"], spec["seed"], spec["correlation"]
            )
        return gib.GaussianSource(spec["cov_x"], spec["cov_y"], spec["cov_xy"])
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def build(res: dict) -> Scenario:
    """Scenario object from a resolved document."""
    s = res["scenario"]
    ch = res["channel"]
    try:
        abg = AbgParams(
            path_exponent=ch["path_exponent"], offset_db=ch["offset_db"],
            freq_exponent=ch["freq_exponent"], shadow_sigma_db=ch["shadow_sigma_db"],
            ref_distance=ch["ref_distance_m"], ref_freq=ch["ref_freq_hz"],
            fading=ch["fading"] == "rayleigh",
        )
    except ValueError as exc:
        raise ConfigError("channel", str(exc)) from exc
    devices = []
    for i, d in enumerate(res["devices"]):
        path = f"devices[{i}]"
        for sub in ("cpu", "radio"):
            for key, val in d[sub].items():
                if not val > 0:
                    raise ConfigError(f"{path}.{sub}.{key}", "must be strictly positive")
        if not d["distance_m"] > 0:
            raise ConfigError(f"{path}.distance_m", "must be strictly positive")
        if d["distance_m"] < abg.ref_distance:
            raise ConfigError(f"{path}.distance_m", "below the reference distance")
        for sub in ("targets", "weights"):
            for key, val in d[sub].items():
                if not val > 0:
                    raise ConfigError(f"{path}.{sub}.{key}", "must be strictly positive")
        source = _build_source(d["source"], f"{path}.source") if "source" in d else None
        devices.append(EdgeDeviceConfig(
            id=d["id"], distance_m=d["distance_m"],
            cpu=CpuConfig(**d["cpu"]), radio=RadioConfig(**d["radio"]),
            targets=Targets(**d["targets"]), weights=LyapunovWeights(**d["weights"]),
            source=source,
        ))
    server = None
    if "server" in res:
        srv = res["server"]
        for key in ("f_c_max", "eta"):
            if not srv[key] > 0:
                raise ConfigError(f"server.{key}", "must be strictly positive")
        if not all(r > 0 for r in srv["rho_es"]):
            raise ConfigError("server.rho_es", "must be strictly positive")
        server = EdgeServerConfig(srv["f_c_max"], srv["eta"], tuple(srv["rho_es"]))
    surrogate = SurrogateSettings()
    if "surrogate" in res:
        su = res["surrogate"]
        try:
            params = sg.SurrogateParams(su["a"], su["b"], su["c"])
        except ValueError as exc:
            raise ConfigError("surrogate", str(exc)) from exc
        if not 0 < su["m_min"] < 1:
            raise ConfigError("surrogate.m_min", "must lie in (0, 1)")
        if su["metric_noise_std"] < 0:
            raise ConfigError("surrogate.metric_noise_std", "must be non-negative")
        surrogate = SurrogateSettings(params, su["mode"], su["m_min"], su["metric_noise_std"])
    for key in ("max_slots", "summary_window"):
        if s[key] < 1:
            raise ConfigError(f"scenario.{key}", "must be at least 1")
    if not s["convergence"]["tol"] > 0:
        raise ConfigError("scenario.convergence.tol", "must be positive")
    if not s["delay_penalty_factor"] > 1:
        raise ConfigError("scenario.delay_penalty_factor", "must exceed 1")
    return Scenario(
        mode=s["mode"], seed=s["seed"], devices=tuple(devices), v=res["lyapunov"]["V"],
        channel=abg, server=server, surrogate=surrogate, max_slots=s["max_slots"],
        summary_window=s["summary_window"], conv_window=s["convergence"]["window"],
        conv_tol=s["convergence"]["tol"], delay_penalty_factor=s["delay_penalty_factor"],
        divergence_factor=s["divergence_factor"], slot_duration=s["slot_duration"],
    )


def loads(text: str) -> tuple[Scenario, dict]:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"TOML syntax error: {exc}") from exc
    res = resolve(doc)
    return build(res), res


def load(path) -> tuple[Scenario, dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from exc
    return loads(text)


def dumps(res: dict) -> str:
    """Canonical TOML text of a resolved document."""
    return tomli_w.dumps(res)


def sweep_grid(res: dict) -> dict:
    """The ``sweep`` table of a resolved document as ``{axis: values}``."""
    return {k: v for k, v in res.get("sweep", {}).items()}

