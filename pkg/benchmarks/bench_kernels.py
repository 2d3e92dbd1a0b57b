"""Timing comparison of the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Builds a representative SCA barrier subproblem from a sampled default-size
network, then times each kernel on both backends. The numba path is warmed
up first so JIT compilation is excluded.
"""

import argparse
import time

import numpy as np

from aircomp.ao import BarrierOptions, ChannelCache, _Subproblem, random_feasible_init
from aircomp.kernels import _numpy as knp
from aircomp.scenario import ScenarioConfig, sample_realization

try:
    from aircomp.kernels import _numba as knb
except ImportError:
    knb = None


def bench(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        tic = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - tic)
    return best


def build_subproblem():
    cfg = ScenarioConfig()
    r = sample_realization(cfg, 0)
    cache = ChannelCache(r)
    strat = random_feasible_init(r, seed=0)
    gains = [cache.H[k] @ strat.v[k].conj() for k in range(cfg.num_clusters)]
    own = [cache.cluster_of == k for k in range(cfg.num_clusters)]
    noise_quad = [cfg.noise_power * float(np.vdot(v, v).real) for v in strat.v]
    coeff = np.array([cfg.weights[k] / (cfg.quant_bits[k] + np.log2(cfg.devices_per_cluster[k]))
                      for k in range(cfg.num_clusters)])
    from aircomp.metrics import analytic_mse
    from aircomp.ao import _cluster_mse_fixed_v
    uf = cache.flatten_u(strat.u) * 0.9
    t_ref = np.array([1.0 / _cluster_mse_fixed_v(gains[k], own[k], noise_quad[k], uf)
                      for k in range(cfg.num_clusters)])
    prob = _Subproblem(gains, own, noise_quad, t_ref, coeff, cfg.max_power)
    z0 = np.empty(prob.dim)
    z0[0:2 * prob.D:2] = uf.real
    z0[1:2 * prob.D:2] = uf.imag
    z0[2 * prob.D:] = 0.9
    assert prob.feasible(z0)
    return prob, z0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    M = 8
    B = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    A = B @ B.conj().T + M * np.eye(M)
    b = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    H = rng.standard_normal((25, M)) + 1j * rng.standard_normal((25, M))
    w = rng.random(25)

    prob, z0 = build_subproblem()
    opts = BarrierOptions()
    barrier_args = (z0, prob.coeff, prob.P, prob.S, prob.s0, prob.G,
                    prob.tcoef, prob.r0, opts.mu0, opts.mu_factor,
                    opts.gap_tol, opts.newton_tol, opts.max_newton,
                    opts.armijo_slope, opts.backtrack)

    cases = [
        ("chol_factor (8x8)", "chol_factor", (A,)),
        ("accumulate_gram (25 x 8)", "accumulate_gram", (H, w)),
        ("barrier_solve (K=5, D=25)", "barrier_solve", barrier_args),
    ]

    print(f"{'kernel':<28} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for label, name, a in cases:
        t_np = bench(getattr(knp, name), a, args.repeats)
        if knb is None:
            print(f"{label:<28} {t_np*1e3:>10.3f}ms {'n/a':>12}")
            continue
        getattr(knb, name)(*a)  # JIT warmup
        t_nb = bench(getattr(knb, name), a, args.repeats)
        print(f"{label:<28} {t_np*1e3:>10.3f}ms {t_nb*1e3:>10.3f}ms "
              f"{t_np/t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
