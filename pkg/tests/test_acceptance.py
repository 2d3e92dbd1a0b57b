"""End-to-end assurance suite.

Each test checks one shipped guarantee at its stated tolerance, using
independent oracles (Monte-Carlo, finite differences, grid search) rather
than re-running the implementation against itself. The heavy shared
computations (batch solver runs, model training) live in session-scoped
fixtures so each is paid for once.

Every per-cluster rate produced anywhere in this module is appended to
REPORTED_RATES; the final clamp test scans them all.
"""

import itertools
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from aircomp import autodiff as ad
from aircomp.ao import (alternating_optimize, align_all_phases,
                        optimal_phase, optimal_receive_beamformer,
                        random_feasible_init, transmit_optimize,
                        update_all_beamformers)
from aircomp.baselines import apt_strategy, fpt_strategy
from aircomp.metrics import (TransceiverStrategy, analytic_mse,
                             empirical_mse, weighted_sum_rate)
from aircomp.model import ModelConfig, forward_tape, init_params, model_forward
from aircomp.scenario import ScenarioConfig, sample_realization
from aircomp import training as T

from conftest import random_feasible_strategy, permute_clusters
from test_autodiff import fd_check

REPO = Path(__file__).resolve().parent.parent

DESK = ScenarioConfig(num_clusters=2, devices_per_cluster=(2, 2),
                      antennas=(2, 2))
TINY_MODEL = ModelConfig(blocks=2, layers=1, hidden=8,
                         decoder_hidden=(32, 16))

# Training recipe for the desk-scale efficacy check (300 epochs pinned).
TRAIN_KW = dict(epochs=300, batch_size=32, dataset_size=768, seed=11,
                lr0=2e-3, adam=True, stage1_fraction=0.1, decay=0.7,
                decay_interval=50)

#: every per-cluster rate reported while this module runs
REPORTED_RATES = []


def _record(report):
    REPORTED_RATES.extend(float(r) for r in report.rates)
    return report


# ---------------------------------------------------------------------------
# shared heavy fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def full_runs():
    """Solver runs on 200 default-size scenarios: (trace, wall secs, report)."""
    cfg = ScenarioConfig()
    runs = []
    for i in range(200):
        r = sample_realization(cfg, 10_000 + i)
        t0 = time.perf_counter()
        strategy, trace = alternating_optimize(r, seed=0)
        secs = time.perf_counter() - t0
        runs.append((trace, secs, weighted_sum_rate(strategy, r), r))
    return runs


@pytest.fixture(scope="session")
def desk_holdout():
    """200 held-out desk scenarios with solver reference rates."""
    items = [r for r, _ in T.make_dataset(DESK, 200, 2026)]
    ao_rates = []
    for r in items:
        strategy, _ = alternating_optimize(r, seed=0)
        ao_rates.append(weighted_sum_rate(strategy, r).weighted_sum)
    return items, np.array(ao_rates)


@pytest.fixture(scope="session")
def trained_params():
    cfg = T.TrainConfig(scenario=DESK, model=TINY_MODEL, **TRAIN_KW)
    params, log = T.train(cfg)
    return params, log


# ---------------------------------------------------------------------------
# 1. analytic MSE vs Monte-Carlo
# ---------------------------------------------------------------------------

def test_analytic_mse_matches_monte_carlo():
    """50 random desk scenarios: analytic MSE within 1% of 1e6-draw MC."""
    rng = np.random.default_rng(2024)
    for i in range(50):
        r = sample_realization(DESK, 20_000 + i)
        s = random_feasible_strategy(r, rng)
        k = int(rng.integers(DESK.num_clusters))
        ana = analytic_mse(k, s, r)
        emp = empirical_mse(k, s, r, num_samples=1_000_000, seed=i)
        assert abs(emp - ana) <= 0.01 * ana, (i, k, ana, emp)


# ---------------------------------------------------------------------------
# 2. receive beamformer optimality
# ---------------------------------------------------------------------------

def test_receive_beamformer_stationary_and_dominant():
    """Closed-form v: FD gradient ~0 and beats 100 random perturbations,
    50 instances."""
    rng = np.random.default_rng(7)
    for i in range(50):
        r = sample_realization(DESK, 30_000 + i)
        s = random_feasible_strategy(r, rng)
        k = int(rng.integers(DESK.num_clusters))
        v = optimal_receive_beamformer(k, s.u, r)

        def mse_of(vk):
            vs = [vk if j == k else s.v[j] for j in range(DESK.num_clusters)]
            return analytic_mse(k, TransceiverStrategy(s.u, vs), r)

        m0 = mse_of(v)
        h = 1e-6
        grad = []
        for j in range(v.size):
            for delta in (h, 1j * h):
                e = np.zeros_like(v)
                e[j] = delta
                grad.append((mse_of(v + e) - mse_of(v - e)) / (2 * h))
        assert np.linalg.norm(grad) <= 1e-6 * max(1.0, abs(m0))
        for _ in range(100):
            dv = rng.standard_normal(v.size) + 1j * rng.standard_normal(v.size)
            assert mse_of(v + 1e-3 * dv) >= m0 - 1e-15


# ---------------------------------------------------------------------------
# 3. phase optimality on a 1024-point grid
# ---------------------------------------------------------------------------

def test_phase_beats_1024_point_grid():
    rng = np.random.default_rng(8)
    grid = np.exp(2j * np.pi * np.arange(1024) / 1024)
    for i in range(50):
        r = sample_realization(DESK, 40_000 + i)
        s = random_feasible_strategy(r, rng)
        l = int(rng.integers(DESK.num_clusters))
        n = int(rng.integers(DESK.devices_per_cluster[l]))
        h = r.h(l, n, l)
        star = optimal_phase(s.v[l], h)
        mod = abs(s.u[l][n])

        def mse_with(phase):
            u = [x.copy() for x in s.u]
            u[l][n] = mod * phase
            return analytic_mse(l, TransceiverStrategy(u, s.v), r)

        best_grid = min(mse_with(p) for p in grid)
        assert mse_with(star) <= best_grid + 1e-9


# ---------------------------------------------------------------------------
# 4. transmit subproblem vs exhaustive modulus grid
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n_devices", [1, 2])
def test_transmit_step_matches_modulus_grid(n_devices):
    """Single-cluster instances: converged objective within 1e-3 of a
    51-point-per-device grid search."""
    cfg = ScenarioConfig(num_clusters=1, devices_per_cluster=n_devices,
                         antennas=2)
    for seed in (1, 2, 3):
        r = sample_realization(cfg, 50_000 + seed)
        strat = random_feasible_init(r, seed=seed)
        u, clamped, _ = transmit_optimize(strat.v, strat.u, r, eps0=1e-8)
        grid = np.linspace(0.0, 1.0, 51)
        best = -np.inf
        for mods in itertools.product(grid, repeat=n_devices):
            cand = align_all_phases(strat.v, r,
                                    [np.sqrt(cfg.max_power) * np.array(mods)])
            rep = _record(weighted_sum_rate(
                TransceiverStrategy(cand, strat.v), r))
            best = max(best, rep.weighted_sum)
        assert clamped >= best - 1e-3


# ---------------------------------------------------------------------------
# 5. solver monotonicity and convergence on 200 default scenarios
# ---------------------------------------------------------------------------

def test_solver_rate_trace_monotone(full_runs):
    for trace, _, report, _ in full_runs:
        _record(report)
        rates = np.asarray(trace.outer_rates)
        assert np.all(np.diff(rates) >= -1e-9)


def test_solver_terminates_under_cap(full_runs):
    # Known shortfall: with the pinned update rules and tolerance, most
    # default-size instances relax sublinearly and genuinely need more than
    # the cap; see the convergence study in the benchmarks. The bound is
    # asserted as stated rather than weakened.
    converged = sum(1 for trace, _, _, _ in full_runs if trace.converged)
    assert converged >= 0.95 * len(full_runs), (
        f"{converged}/{len(full_runs)} terminated under the cap")


# ---------------------------------------------------------------------------
# 6. gradient exactness: primitives and the full tiny model
# ---------------------------------------------------------------------------

def test_gradients_every_primitive():
    sq = lambda x: ad.vsum(ad.mul(x, x))
    fd_check(lambda a, b: sq(ad.add(a, b)), [(3, 4), (4,)], rtol=1e-4)
    fd_check(lambda a, b: sq(ad.sub(a, b)), [(2, 3), (2, 1)], rtol=1e-4)
    fd_check(lambda a, b: sq(ad.mul(a, b)), [(3,), (3,)], rtol=1e-4)
    fd_check(lambda a: sq(ad.neg(a)), [(5,)], rtol=1e-4)
    fd_check(lambda A, B: sq(ad.matmul(A, B)), [(3, 4), (4, 2)], rtol=1e-4)
    fd_check(lambda A, x: sq(ad.matvec(A, x)), [(3, 4), (4,)], rtol=1e-4)
    fd_check(lambda a: ad.vsum(a), [(4, 3)], rtol=1e-4)
    fd_check(lambda a: sq(ad.vsum(a, axis=0)), [(4, 3)], rtol=1e-4)
    fd_check(lambda a: sq(ad.index(a, np.array([0, 2, 2]))), [(4,)],
             rtol=1e-4)
    fd_check(lambda a, b: sq(ad.concat([a, b])), [(2, 3), (4, 3)], rtol=1e-4)
    fd_check(lambda a, b: sq(ad.stack2(a, b)), [(3,), (3,)], rtol=1e-4)
    fd_check(lambda a: sq(ad.transpose(a)), [(2, 5)], rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.ln(ad.add(ad.mul(a, a), 1.0))), [(4,)],
             rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.log2(ad.add(ad.mul(a, a), 0.5))), [(4,)],
             rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.sqrt(ad.add(ad.mul(a, a), 1.0))), [(4,)],
             rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.reciprocal(ad.add(ad.mul(a, a), 1.0))),
             [(4,)], rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.tanh(a)), [(5,)], rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.sigmoid(a)), [(5,)], rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.selu(a)), [(7,)], rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.positive_part(a)), [(6,)], rtol=1e-4)
    fd_check(lambda a: ad.vsum(ad.magnitude(a)), [(8,)], rtol=1e-4)
    fd_check(lambda a, g, b: ad.vsum(ad.mul(ad.layer_norm(a, g, b),
                                            ad.layer_norm(a, g, b))),
             [(4, 3), (3,), (3,)], rtol=1e-4)


def _tiny_model_loss(realization, params):
    """Scalar tape loss with every parameter path differentiated."""
    u, vs, graph, groups = forward_tape(realization, params,
                                        detach_lambda=False)
    cfg = realization.config
    coeff = T._rate_coeffs(cfg)
    rate = None
    for k in range(graph.K):
        gains = ad.cmatvec_const(graph.cache.H[k].conj(), vs[k])
        z = ad.cmul(ad.cconj(gains), u)
        zr, zi = ad.creal(z), ad.cimag(z)
        err = ad.sub(zr, ad.Value(graph.own[k]))
        noise = ad.mul(ad.vsum(ad.mul(vs[k], vs[k])), graph.sigma2)
        mse = ad.add(ad.vsum(ad.add(ad.mul(err, err), ad.mul(zi, zi))),
                     noise)
        term = ad.mul(ad.log2(ad.reciprocal(mse)), coeff[k])
        rate = term if rate is None else ad.add(rate, term)
    return ad.neg(rate), groups


def test_gradients_full_tiny_model():
    """Analytic gradient of the end-to-end tiny model matches central
    differences at 1e-4 relative (one random direction per parameter)."""
    r = sample_realization(DESK, 61_000)
    params = init_params(TINY_MODEL, seed=4)
    loss, groups = _tiny_model_loss(r, params)
    ad.backward(loss)
    rng = np.random.default_rng(5)
    h = 1e-6
    for gi, group in enumerate(params.groups):
        for name, val in group.items():
            d = rng.standard_normal(val.shape)
            d /= np.linalg.norm(d)
            analytic = float(np.sum(groups[gi][name].grad * d))
            for sign in (1.0, -1.0):
                group[name] = val + sign * h * d
                if sign > 0:
                    lp = float(_tiny_model_loss(r, params)[0].data)
                else:
                    lm = float(_tiny_model_loss(r, params)[0].data)
            group[name] = val
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(analytic), 1e-8)
            assert abs(analytic - fd) / denom <= 1e-4, \
                (gi, name, analytic, fd)


# ---------------------------------------------------------------------------
# 7. permutation equivariance
# ---------------------------------------------------------------------------

def test_model_is_cluster_permutation_equivariant():
    cfg = ScenarioConfig(num_clusters=3, devices_per_cluster=(2, 3, 2),
                         antennas=(2, 2, 2), weights=(1.0, 1.0, 1.0),
                         quant_bits=(2, 2, 2))
    params = init_params(TINY_MODEL, seed=6)
    rng = np.random.default_rng(9)
    for i in range(20):
        r = sample_realization(cfg, 70_000 + i)
        base = model_forward(r, params)
        rep0 = _record(weighted_sum_rate(base, r))
        for _ in range(5):
            perm = rng.permutation(cfg.num_clusters)
            rp = permute_clusters(r, perm)
            out = model_forward(rp, params)
            repp = _record(weighted_sum_rate(out, rp))
            for q, p in enumerate(perm):
                assert np.max(np.abs(out.u[q] - base.u[p])) <= 1e-9
                assert np.max(np.abs(out.v[q] - base.v[p])) <= 1e-9
            assert abs(repp.weighted_sum - rep0.weighted_sum) <= 1e-9


# ---------------------------------------------------------------------------
# 8. desk-scale training efficacy
# ---------------------------------------------------------------------------

def test_trained_model_approaches_solver_and_beats_baselines(
        trained_params, desk_holdout):
    """Tiny model after 300 epochs: held-out mean rate at least 90% of the
    iterative solver's, and above both power-allocation baselines."""
    params, _ = trained_params
    items, ao_rates = desk_holdout
    model_rates = []
    for r in items:
        rep = _record(weighted_sum_rate(model_forward(r, params), r))
        model_rates.append(rep.weighted_sum)
    fpt_rates = [_record(weighted_sum_rate(fpt_strategy(r), r)).weighted_sum
                 for r in items]
    apt_rates = [_record(weighted_sum_rate(apt_strategy(r), r)).weighted_sum
                 for r in items]
    mean_model = float(np.mean(model_rates))
    assert mean_model >= 0.9 * float(np.mean(ao_rates)), \
        (mean_model, float(np.mean(ao_rates)))
    assert mean_model > float(np.mean(fpt_rates))
    assert mean_model > float(np.mean(apt_rates)), \
        (mean_model, float(np.mean(apt_rates)))


# ---------------------------------------------------------------------------
# 9. inference speed vs iterative solver
# ---------------------------------------------------------------------------

def test_model_forward_is_faster_than_solver(full_runs):
    """Mean model wall-clock <= 10% of mean solver wall-clock, 100
    default-size scenarios."""
    params = init_params(ModelConfig(), seed=0)
    sample = full_runs[:100]
    ao_mean = float(np.mean([secs for _, secs, _, _ in sample]))
    model_secs = []
    for _, _, _, r in sample:
        t0 = time.perf_counter()
        s = model_forward(r, params)
        model_secs.append(time.perf_counter() - t0)
        _record(weighted_sum_rate(s, r))
    assert float(np.mean(model_secs)) <= 0.10 * ao_mean, \
        (float(np.mean(model_secs)), ao_mean)


# ---------------------------------------------------------------------------
# 10. fine-tuning on a shifted deployment beats zero-shot
# ---------------------------------------------------------------------------

def test_finetuning_on_shifted_scenario_beats_zero_shot(trained_params):
    params, _ = trained_params
    shifted = DESK.scaled(area_radius=DESK.area_radius * 0.75)
    holdout = [r for r, _ in T.make_dataset(shifted, 50, 4040)]
    zero_shot = T.evaluate(lambda r: model_forward(r, params), holdout)
    cfg = T.TrainConfig(scenario=shifted, model=TINY_MODEL, epochs=60,
                        batch_size=64, dataset_size=128, seed=12,
                        lr0=TRAIN_KW["lr0"] / 4, stage1_fraction=0.0)
    tuned, _ = T.train(cfg, init=params)
    tuned_eval = T.evaluate(lambda r: model_forward(r, tuned), holdout)
    for r in holdout:
        _record(weighted_sum_rate(model_forward(r, tuned), r))
    assert tuned_eval.mean_rate >= zero_shot.mean_rate - 1e-9, \
        (tuned_eval.mean_rate, zero_shot.mean_rate)


# ---------------------------------------------------------------------------
# 11. rate clamp property across everything this suite reported
# ---------------------------------------------------------------------------

def test_no_reported_rate_is_negative():
    assert len(REPORTED_RATES) > 5_000
    assert min(REPORTED_RATES) >= 0.0


# ---------------------------------------------------------------------------
# 12. figure pipeline consumes every CSV kind
# ---------------------------------------------------------------------------

FRONTEND = REPO / "frontend"
PLOT_FIXTURES = {
    "sweep": "sweep.csv",
    "violin": "solve.csv",
    "training": "training.csv",
    "heatmap": "heatmap.csv",
}


@pytest.mark.skipif(not (FRONTEND / "dist" / "cli.js").exists(),
                    reason="figure package not built (npm run build)")
@pytest.mark.parametrize("kind", sorted(PLOT_FIXTURES))
def test_plot_cli_renders_each_csv_kind(kind, tmp_path):
    fixture = FRONTEND / "test" / "fixtures" / PLOT_FIXTURES[kind]
    out = tmp_path / f"{kind}.svg"
    proc = subprocess.run(
        ["node", str(FRONTEND / "dist" / "cli.js"), kind,
         "--in", str(fixture), "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.stat().st_size > 0


@pytest.mark.skipif(not (FRONTEND / "dist" / "cli.js").exists(),
                    reason="figure package not built (npm run build)")
def test_plot_cli_rejects_schema_version_mismatch(tmp_path):
    fixture = FRONTEND / "test" / "fixtures" / "sweep.csv"
    bad = tmp_path / "future.csv"
    bad.write_text(fixture.read_text().replace("aircomp-csv-schema 1",
                                               "aircomp-csv-schema 9"))
    proc = subprocess.run(
        ["node", str(FRONTEND / "dist" / "cli.js"), "sweep",
         "--in", str(bad)],
        capture_output=True, text=True)
    assert proc.returncode != 0
    assert "version" in proc.stderr.lower()
    assert list(tmp_path.iterdir()) == [bad]
