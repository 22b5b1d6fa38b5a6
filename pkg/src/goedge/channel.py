"""Wireless channel per edge device.

Large-scale loss follows the alpha-beta-gamma (ABG) model, small-scale
fading is a unit-mean exponential power gain drawn independently per slot,
and the achievable rate is the Shannon bound with base-2 logarithm.

Random draws come from counter-based streams: the value for a given
``(seed, device, slot)`` never depends on which other draws were made or
in which order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# slots per generator instantiation; draws are a pure function of (seed, device, slot)
STREAM_BLOCK = 1024


@dataclass(frozen=True)
class AbgParams:
    path_exponent: float = 3.5
    offset_db: float = 24.4
    freq_exponent: float = 1.9
    shadow_sigma_db: float = 7.6
    ref_distance: float = 1.0
    ref_freq: float = 1e9
    fading: bool = True

    def __post_init__(self):
        if self.ref_distance <= 0:
            raise ValueError("ref_distance must be positive")
        if self.ref_freq <= 0:
            raise ValueError("ref_freq must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be non-negative")


@dataclass(frozen=True)
class RadioConfig:
    bandwidth: float
    noise_psd: float
    max_tx_power: float
    carrier_freq: float = 1e9

    def __post_init__(self):
        for name in ("bandwidth", "noise_psd", "max_tx_power", "carrier_freq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class ChannelDraw:
    slot: int
    gain: float
    r_max: float


def dbm_per_hz_to_w(dbm_per_hz: float) -> float:
    """-174 dBm/Hz -> 3.981e-21 W/Hz."""
    return 10.0 ** ((dbm_per_hz - 30.0) / 10.0)


def pathloss_db(distance_m, freq_hz, p: AbgParams):
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < p.ref_distance):
        raise DomainError(f"distance below the reference distance {p.ref_distance} m")
    pl = (
        10.0 * p.path_exponent * np.log10(d / p.ref_distance)
        + p.offset_db
        + 10.0 * p.freq_exponent * np.log10(freq_hz / p.ref_freq)
    )
    return float(pl) if pl.ndim == 0 else pl


def max_rate(gain, radio: RadioConfig):
    """``B log2(1 + p h / (N0 B))`` in bit/s."""
    h = np.asarray(gain, dtype=float)
    if np.any(h < 0):
        raise DomainError("channel gain must be non-negative")
    snr = radio.max_tx_power * h / (radio.noise_psd * radio.bandwidth)
    r = radio.bandwidth * np.log2(1.0 + snr)
    return float(r) if r.ndim == 0 else r


def tx_power(rate, gain, radio: RadioConfig):
    """Power needed to sustain ``rate`` over gain ``gain`` (inverse of Shannon)."""
    rate = np.asarray(rate, dtype=float)
    gain = np.asarray(gain, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = radio.bandwidth * radio.noise_psd / gain * np.expm1(rate * np.log(2.0) / radio.bandwidth)
    return np.where(rate > 0, p, 0.0)


class DeviceStreams:
    """Counter-based random streams keyed by ``(seed, device, slot)``.

    Each block of ``STREAM_BLOCK`` slots is generated from its own
    ``SeedSequence((seed, purpose, device, block))``, so a draw depends
    only on its key.
    """

    PURPOSES = {"channel": 0, "metric": 1}

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache: dict[tuple[int, int, int], np.ndarray] = {}
        self._stacked: dict = {}

    def _block(self, purpose: str, device: int, block: int) -> np.ndarray:
        key = (self.PURPOSES[purpose], device, block)
        arr = self._cache.get(key)
        if arr is None:
            rng = np.random.default_rng([self.seed, key[0], device, block])
            # fixed draw order: shadowing normals, then fading exponentials
            arr = np.stack(
                [rng.standard_normal(STREAM_BLOCK), rng.standard_exponential(STREAM_BLOCK)]
            )
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = arr
        return arr

    def draws(self, purpose: str, device: int, slot: int) -> tuple[float, float]:
        """``(standard normal, unit exponential)`` for one key."""
        block, offset = divmod(int(slot), STREAM_BLOCK)
        arr = self._block(purpose, device, block)
        return float(arr[0, offset]), float(arr[1, offset])

    def block_many(self, purpose: str, devices, block: int) -> tuple[np.ndarray, np.ndarray]:
        """``(K, STREAM_BLOCK)`` normals and exponentials of one block."""
        key = (tuple(int(d) for d in devices), int(block))
        cached = self._stacked.get(purpose)
        if cached is None or cached[0] != key:
            stacked = np.stack([self._block(purpose, d, key[1]) for d in key[0]], axis=1)
            cached = (key, stacked)
            self._stacked[purpose] = cached
        return cached[1][0], cached[1][1]

    def draws_many(self, purpose: str, devices, slot: int) -> tuple[np.ndarray, np.ndarray]:
        """Vector of draws for several devices at one slot."""
        block, offset = divmod(int(slot), STREAM_BLOCK)
        z, e = self.block_many(purpose, devices, block)
        return z[:, offset], e[:, offset]


def gain_from_draws(pl_db, normal, exponential, p: AbgParams):
    """Linear power gain from pathloss and the unit random draws."""
    shadow = p.shadow_sigma_db * np.asarray(normal)
    fade = np.asarray(exponential) if p.fading else 1.0
    return 10.0 ** (-(np.asarray(pl_db) + shadow) / 10.0) * fade


def sample_gain(
    device: int,
    slot: int,
    streams: DeviceStreams,
    distance_m: float,
    p: AbgParams,
    radio: RadioConfig,
) -> ChannelDraw:
    pl = pathloss_db(distance_m, radio.carrier_freq, p)
    z, e = streams.draws("channel", device, slot)
    h = float(gain_from_draws(pl, z, e, p))
    return ChannelDraw(slot=int(slot), gain=h, r_max=max_rate(h, radio))
