"""Per-cluster MSE, AirComp rate, and the weighted-sum objective.

The analytic MSE is the closed-form expectation of the squared aggregation
error; the empirical MSE simulates the transmission with Gaussian symbols and
noise and serves as its Monte-Carlo oracle.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)

POWER_SLACK = 1e-9
MSE_FLOOR = 1e-30  # sentinel cap when a caller reports an exactly-zero MSE


@dataclass
class TransceiverStrategy:
    """Per-device complex transmit scalars and per-cluster receive beamformers."""
    u: list  # per cluster: (N_l,) complex
    v: list  # per cluster: (M_k,) complex

    def copy(self):
        return TransceiverStrategy([x.copy() for x in self.u], [x.copy() for x in self.v])

    def check_power(self, cfg):
        for l, ul in enumerate(self.u):
            excess = np.abs(ul) ** 2 - cfg.max_power
            if np.any(excess > POWER_SLACK):
                raise ValueError(f"power constraint violated in cluster {l} by {excess.max():.3e}")


@dataclass
class RateReport:
    mse: np.ndarray        # per cluster
    rates: np.ndarray      # per cluster, num/Hz
    weighted_sum: float


def effective_gains(k, strategy, realization):
    """v_k^H h_{(l,n),k} u_{(l,n)} for every device in the network, flattened."""
    v = strategy.v[k]
    gains = []
    for l, n in realization.device_index_pairs():
        gains.append(np.vdot(v, realization.h(l, n, k)) * strategy.u[l][n])
    return np.asarray(gains, dtype=np.complex128)


def analytic_mse(k, strategy, realization, noise_power=None):
    """Closed-form MSE of cluster k, per-term form.

    sum_{n in k} |v^H h u - 1|^2 + sum_{l != k} sum_n |v^H h u|^2 + sigma^2 ||v||^2
    """
    cfg = realization.config
    sigma2 = cfg.noise_power if noise_power is None else noise_power
    v = strategy.v[k]
    total = sigma2 * float(np.vdot(v, v).real)
    for l in range(cfg.num_clusters):
        g = np.array([np.vdot(v, realization.h(l, n, k)) * strategy.u[l][n]
                      for n in range(cfg.devices_per_cluster[l])])
        if l == k:
            total += float(np.sum(np.abs(g - 1.0) ** 2))
        else:
            total += float(np.sum(np.abs(g) ** 2))
    return total


def analytic_mse_quadratic(k, strategy, realization, noise_power=None):
    """Equivalent expanded quadratic form v^H A v - 2 Re(v^H b) + N_k."""
    cfg = realization.config
    sigma2 = cfg.noise_power if noise_power is None else noise_power
    v = strategy.v[k]
    M = cfg.antennas[k]
    A = sigma2 * np.eye(M, dtype=np.complex128)
    b = np.zeros(M, dtype=np.complex128)
    for l, n in realization.device_index_pairs():
        h = realization.h(l, n, k)
        u = strategy.u[l][n]
        A += (np.abs(u) ** 2) * np.outer(h, h.conj())
        if l == k:
            b += u * h
    quad = float(np.vdot(v, A @ v).real)
    lin = float(np.vdot(v, b).real)
    return quad - 2.0 * lin + cfg.devices_per_cluster[k]


def empirical_mse(k, strategy, realization, noise_power=None, num_samples=1_000_000,
                  seed=0, chunk=65536):
    """Monte-Carlo estimate of E|s_k - v^H y_k|^2 with CN(0,1) symbols."""
    cfg = realization.config
    sigma2 = cfg.noise_power if noise_power is None else noise_power
    gains = effective_gains(k, strategy, realization)
    offsets = np.cumsum([0] + list(cfg.devices_per_cluster))
    own_idx = np.arange(offsets[k], offsets[k + 1], dtype=np.int64)
    noise_std = np.sqrt(sigma2 * float(np.vdot(strategy.v[k], strategy.v[k]).real))
    rng = np.random.default_rng(seed)
    D = gains.shape[0]
    total = 0.0
    done = 0
    while done < num_samples:
        S = min(chunk, num_samples - done)
        x = (rng.standard_normal((S, D)) + 1j * rng.standard_normal((S, D))) / np.sqrt(2.0)
        z = noise_std * (rng.standard_normal(S) + 1j * rng.standard_normal(S)) / np.sqrt(2.0)
        total += kernels.mse_chunk(gains, own_idx, x, z)
        done += S
    return total / num_samples


def aircomp_rate(mse, quant_bits, num_devices):
    """Computed function values per channel use: log2+(1/MSE) / (Q + log2 N)."""
    if mse < 0:
        raise ValueError("MSE cannot be negative")
    if mse == 0.0:
        logger.warning("zero MSE reported; capping at %.1e", MSE_FLOOR)
        mse = MSE_FLOOR
    return max(0.0, np.log2(1.0 / mse)) / (quant_bits + np.log2(num_devices))


def weighted_sum_rate(strategy, realization, noise_power=None):
    """Aggregate per-cluster MSEs and rates into a RateReport."""
    cfg = realization.config
    K = cfg.num_clusters
    mses = np.array([analytic_mse(k, strategy, realization, noise_power) for k in range(K)])
    rates = np.array([aircomp_rate(mses[k], cfg.quant_bits[k], cfg.devices_per_cluster[k])
                      for k in range(K)])
    return RateReport(mses, rates, float(np.dot(cfg.weights, rates)))
