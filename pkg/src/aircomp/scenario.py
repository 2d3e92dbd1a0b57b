"""Network topologies and Rician-fading channel realizations.

A scenario is a set of K device clusters, each served by its own multi-antenna
fusion center, dropped uniformly in a disk. Devices sit in an annulus around
their fusion center. Channels combine distance-dependent path loss with Rician
fading (unit-modulus steering vector line-of-sight component plus Rayleigh
scatter). Everything is deterministic given (config, master seed).
"""

import io
import logging
import struct
from dataclasses import dataclass, field, replace

import numpy as np

logger = logging.getLogger(__name__)

MAGIC = b"ACSN"
FORMAT_VERSION = 1

# reference distance for the path-loss model, meters
D_REF = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    num_clusters: int = 5
    devices_per_cluster: tuple = 5
    antennas: tuple = 8
    area_radius: float = 2000.0
    device_annulus_min: float = 100.0
    device_annulus_max: float = 1000.0
    pathloss_exponent: float = 2.2
    ref_attenuation_db: float = -30.0
    rician_factor: float = 5.0
    noise_power: float = 1e-12  # -90 dBm in watts
    max_power: float = 1.0
    weights: tuple = 1.0
    quant_bits: tuple = 2

    def __post_init__(self):
        K = int(self.num_clusters)
        object.__setattr__(self, "num_clusters", K)
        object.__setattr__(self, "devices_per_cluster", _per_cluster(self.devices_per_cluster, K, int))
        object.__setattr__(self, "antennas", _per_cluster(self.antennas, K, int))
        object.__setattr__(self, "weights", _per_cluster(self.weights, K, float))
        object.__setattr__(self, "quant_bits", _per_cluster(self.quant_bits, K, int))
        self.validate()

    def validate(self):
        if self.num_clusters < 1:
            raise ValueError("need at least one cluster")
        if any(n < 1 for n in self.devices_per_cluster):
            raise ValueError("each cluster needs at least one device")
        if any(m < 1 for m in self.antennas):
            raise ValueError("each fusion center needs at least one antenna")
        if not (0.0 < self.device_annulus_min < self.device_annulus_max <= self.area_radius):
            raise ValueError("require 0 < annulus_min < annulus_max <= area_radius")
        if self.rician_factor < 0:
            raise ValueError("Rician factor must be nonnegative")
        if self.noise_power <= 0 or self.max_power <= 0:
            raise ValueError("noise and max power must be positive")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if any(q < 1 for q in self.quant_bits):
            raise ValueError("quantization bits must be >= 1")

    @property
    def total_devices(self):
        return sum(self.devices_per_cluster)

    def scaled(self, **overrides):
        """Copy of this config with some fields replaced."""
        return replace(self, **overrides)


@dataclass
class NetworkRealization:
    config: ScenarioConfig
    fc_positions: np.ndarray            # (K, 2) meters
    device_positions: list              # per cluster: (N_l, 2) meters
    channels: list = None               # channels[l][n][k] -> (M_k,) complex

    def h(self, l, n, k):
        return self.channels[l][n][k]

    @property
    def has_channels(self):
        return self.channels is not None

    def device_index_pairs(self):
        """All (l, n) device coordinates in declaration order."""
        for l in range(self.config.num_clusters):
            for n in range(self.config.devices_per_cluster[l]):
                yield (l, n)


def _per_cluster(value, K, cast):
    if np.isscalar(value):
        return tuple(cast(value) for _ in range(K))
    out = tuple(cast(v) for v in value)
    if len(out) != K:
        raise ValueError(f"per-cluster field has length {len(out)}, expected {K}")
    return out


def split_seed(master_seed):
    """Derive independent (topology, fading) seeds from one master seed."""
    state = np.random.SeedSequence(master_seed).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def sample_topology(cfg, seed):
    """Drop fusion centers uniformly in the disk and devices in the annulus."""
    rng = np.random.default_rng(seed)
    K = cfg.num_clusters
    r = cfg.area_radius * np.sqrt(rng.random(K))
    ang = 2.0 * np.pi * rng.random(K)
    fc = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    device_positions = []
    lo2, hi2 = cfg.device_annulus_min ** 2, cfg.device_annulus_max ** 2
    for l in range(K):
        N = cfg.devices_per_cluster[l]
        rd = np.sqrt(lo2 + (hi2 - lo2) * rng.random(N))
        ad = 2.0 * np.pi * rng.random(N)
        device_positions.append(fc[l] + np.column_stack([rd * np.cos(ad), rd * np.sin(ad)]))
    return NetworkRealization(cfg, fc, device_positions)


def pathloss_gain(distance, cfg):
    """Average channel power g(d) = g0 * (d / d_ref)^(-alpha), clamped at d_ref."""
    g0 = 10.0 ** (cfg.ref_attenuation_db / 10.0)
    d = np.maximum(distance, D_REF)
    return g0 * (d / D_REF) ** (-cfg.pathloss_exponent)


def steering_vector(bearing, M):
    """Half-wavelength ULA response for a planar bearing angle."""
    m = np.arange(M)
    return np.exp(1j * np.pi * m * np.sin(bearing))


def generate_channels(topology, cfg, seed):
    """Fill in Rician-fading channels for every (device, fusion center) pair."""
    rng = np.random.default_rng(seed)
    K = cfg.num_clusters
    kappa = cfg.rician_factor
    los_w = np.sqrt(kappa / (1.0 + kappa))
    nlos_w = np.sqrt(1.0 / (1.0 + kappa))
    channels = []
    for l in range(K):
        per_device = []
        for n in range(cfg.devices_per_cluster[l]):
            pos = topology.device_positions[l][n]
            links = []
            for k in range(K):
                M = cfg.antennas[k]
                delta = topology.fc_positions[k] - pos
                d = float(np.hypot(*delta))
                if d == 0.0:
                    logger.warning("zero device-to-center distance at (%d,%d,%d); clamping", l, n, k)
                g = pathloss_gain(d, cfg)
                bearing = float(np.arctan2(delta[1], delta[0]))
                nlos = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2.0)
                h = np.sqrt(g) * (los_w * steering_vector(bearing, M) + nlos_w * nlos)
                links.append(h)
            per_device.append(links)
        channels.append(per_device)
    return NetworkRealization(cfg, topology.fc_positions, topology.device_positions, channels)


def sample_realization(cfg, master_seed):
    """Topology plus channels from a single master seed."""
    topo_seed, fading_seed = split_seed(master_seed)
    return generate_channels(sample_topology(cfg, topo_seed), cfg, fading_seed)


# ---------------------------------------------------------------------------
# Versioned binary serialization: magic "ACSN", u32 version, config block,
# positions, channels as little-endian float64 (real, imag interleaved).
# ---------------------------------------------------------------------------

class ScenarioFormatError(ValueError):
    pass


def _w_u32(buf, *vals):
    buf.write(struct.pack("<" + "I" * len(vals), *vals))


def _w_f64(buf, arr):
    buf.write(np.asarray(arr, dtype="<f8").tobytes())


def serialize_realization(r):
    cfg = r.config
    buf = io.BytesIO()
    buf.write(MAGIC)
    _w_u32(buf, FORMAT_VERSION, cfg.num_clusters)
    _w_u32(buf, *cfg.devices_per_cluster)
    _w_u32(buf, *cfg.antennas)
    _w_f64(buf, [cfg.area_radius, cfg.device_annulus_min, cfg.device_annulus_max,
                 cfg.pathloss_exponent, cfg.ref_attenuation_db, cfg.rician_factor,
                 cfg.noise_power, cfg.max_power])
    _w_f64(buf, cfg.weights)
    _w_u32(buf, *cfg.quant_bits)
    _w_f64(buf, r.fc_positions)
    for l in range(cfg.num_clusters):
        _w_f64(buf, r.device_positions[l])
    _w_u32(buf, 1 if r.has_channels else 0)
    if r.has_channels:
        for l, n in r.device_index_pairs():
            for k in range(cfg.num_clusters):
                h = r.channels[l][n][k]
                _w_f64(buf, np.column_stack([h.real, h.imag]))
    return buf.getvalue()


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ScenarioFormatError("truncated scenario stream")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, count=1):
        vals = struct.unpack("<" + "I" * count, self.take(4 * count))
        return vals[0] if count == 1 else vals

    def f64(self, count):
        return np.frombuffer(self.take(8 * count), dtype="<f8")


def deserialize_realization(data):
    rd = _Reader(data)
    if rd.take(4) != MAGIC:
        raise ScenarioFormatError("bad magic bytes, not a scenario file")
    version = rd.u32()
    if version != FORMAT_VERSION:
        raise ScenarioFormatError(f"unsupported scenario format version {version}")
    K = rd.u32()
    devices = rd.u32(K)
    devices = (devices,) if K == 1 else devices
    antennas = rd.u32(K)
    antennas = (antennas,) if K == 1 else antennas
    scalars = rd.f64(8)
    weights = tuple(rd.f64(K))
    quant = rd.u32(K)
    quant = (quant,) if K == 1 else quant
    cfg = ScenarioConfig(
        num_clusters=K, devices_per_cluster=devices, antennas=antennas,
        area_radius=scalars[0], device_annulus_min=scalars[1],
        device_annulus_max=scalars[2], pathloss_exponent=scalars[3],
        ref_attenuation_db=scalars[4], rician_factor=scalars[5],
        noise_power=scalars[6], max_power=scalars[7],
        weights=weights, quant_bits=quant,
    )
    fc = rd.f64(2 * K).reshape(K, 2).copy()
    device_positions = [rd.f64(2 * cfg.devices_per_cluster[l]).reshape(-1, 2).copy()
                        for l in range(K)]
    channels = None
    if rd.u32() == 1:
        channels = []
        for l in range(K):
            per_device = []
            for n in range(cfg.devices_per_cluster[l]):
                links = []
                for k in range(K):
                    M = cfg.antennas[k]
                    flat = rd.f64(2 * M)
                    links.append((flat[0::2] + 1j * flat[1::2]).astype(np.complex128))
                per_device.append(links)
            channels.append(per_device)
    if rd.pos != len(data):
        raise ScenarioFormatError("trailing bytes after scenario payload")
    return NetworkRealization(cfg, fc, device_positions, channels)


def realizations_equal(a, b):
    """Bit-exact comparison used by the round-trip tests."""
    if a.config != b.config:
        return False
    if not np.array_equal(a.fc_positions, b.fc_positions):
        return False
    for pa, pb in zip(a.device_positions, b.device_positions):
        if not np.array_equal(pa, pb):
            return False
    if a.has_channels != b.has_channels:
        return False
    if a.has_channels:
        for l, n in a.device_index_pairs():
            for k in range(a.config.num_clusters):
                if not np.array_equal(a.channels[l][n][k], b.channels[l][n][k]):
                    return False
    return True
