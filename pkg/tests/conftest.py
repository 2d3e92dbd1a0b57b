import numpy as np
import pytest

from aircomp.scenario import ScenarioConfig, sample_realization


@pytest.fixture(scope="session")
def desk_cfg():
    """Small network that still has inter-cluster interference."""
    return ScenarioConfig(num_clusters=2, devices_per_cluster=(2, 2),
                          antennas=(2, 2))


@pytest.fixture(scope="session")
def desk_realization(desk_cfg):
    return sample_realization(desk_cfg, 3)


@pytest.fixture(scope="session")
def full_cfg():
    return ScenarioConfig()


def permute_clusters(realization, perm):
    """Relabel clusters by `perm`: new cluster l is old cluster perm[l]."""
    from aircomp.scenario import NetworkRealization
    cfg = realization.config
    perm = list(perm)
    new_cfg = cfg.scaled(
        devices_per_cluster=tuple(cfg.devices_per_cluster[p] for p in perm),
        antennas=tuple(cfg.antennas[p] for p in perm),
        weights=tuple(cfg.weights[p] for p in perm),
        quant_bits=tuple(cfg.quant_bits[p] for p in perm))
    fc = realization.fc_positions[perm]
    dev = [realization.device_positions[p] for p in perm]
    channels = [[[realization.channels[p][n][q] for q in perm]
                 for n in range(cfg.devices_per_cluster[p])]
                for p in perm]
    return NetworkRealization(new_cfg, fc, dev, channels)


def random_feasible_strategy(realization, rng):
    """Random power-feasible transmit scalars with matched beamformers."""
    from aircomp.ao import update_all_beamformers
    cfg = realization.config
    u = []
    for l in range(cfg.num_clusters):
        n = cfg.devices_per_cluster[l]
        mod = np.sqrt(cfg.max_power) * rng.random(n)
        ph = np.exp(2j * np.pi * rng.random(n))
        u.append(mod * ph)
    v = update_all_beamformers(u, realization)
    from aircomp.metrics import TransceiverStrategy
    return TransceiverStrategy(u, v)
