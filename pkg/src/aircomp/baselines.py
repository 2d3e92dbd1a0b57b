"""Non-learning transmit baselines: full-power and channel-inverting power.

Both pick transmit moduli by a fixed rule, then alternate the optimal phase
alignment and the closed-form receive beamformers until the weighted sum
rate stabilizes.
"""

import logging

import numpy as np

from .ao import (ChannelCache, align_all_phases, optimal_phase,
                 update_all_beamformers)
from .metrics import TransceiverStrategy, weighted_sum_rate

logger = logging.getLogger(__name__)

GAIN_EPS = 1e-300


def _alternate(realization, moduli_rule, noise_power=None, tol=1e-6,
               max_rounds=50):
    """Alternate moduli rule + phase alignment with beamformer updates."""
    cfg = realization.config
    cache = ChannelCache(realization)
    P = cfg.max_power
    u = [np.full(cfg.devices_per_cluster[l], np.sqrt(P), dtype=np.complex128)
         for l in range(cfg.num_clusters)]
    rate = -np.inf
    strategy = None
    for _ in range(max_rounds):
        v = update_all_beamformers(u, realization, noise_power, cache)
        u = align_all_phases(v, realization, moduli_rule(v))
        strategy = TransceiverStrategy(u, v)
        new_rate = weighted_sum_rate(strategy, realization,
                                     noise_power).weighted_sum
        if new_rate - rate < tol:
            rate = new_rate
            break
        rate = new_rate
    return strategy


def fpt_strategy(realization, noise_power=None, tol=1e-6, max_rounds=50):
    """Every device at full power; phases aligned to its own beamformer."""
    cfg = realization.config
    moduli = [np.full(cfg.devices_per_cluster[l], np.sqrt(cfg.max_power))
              for l in range(cfg.num_clusters)]
    return _alternate(realization, lambda v: moduli, noise_power, tol,
                      max_rounds)


def apt_strategy(realization, noise_power=None, tol=1e-6, max_rounds=50):
    """Power inverted to the effective channel, pinned by the worst device.

    Within each cluster, |u_n| = sqrt(P) * min_m |h_m^H v| / |h_n^H v|, so
    every device's received amplitude equals the worst one's at full power.
    """
    cfg = realization.config

    def moduli_rule(v):
        out = []
        for l in range(cfg.num_clusters):
            gains = np.array([abs(np.vdot(realization.h(l, n, l), v[l]))
                              for n in range(cfg.devices_per_cluster[l])])
            dead = gains < GAIN_EPS
            if dead.any():
                logger.warning("cluster %d has %d device(s) with zero "
                               "effective channel; transmitting nothing",
                               l, int(dead.sum()))
            alive = gains[~dead]
            if alive.size == 0:
                out.append(np.zeros(cfg.devices_per_cluster[l]))
                continue
            scale = np.sqrt(cfg.max_power) * alive.min()
            m = np.where(dead, 0.0, scale / np.where(dead, 1.0, gains))
            out.append(m)
        return out

    return _alternate(realization, moduli_rule, noise_power, tol, max_rounds)
