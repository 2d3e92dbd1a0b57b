import numpy as np
import pytest

from aircomp import autodiff as ad
from aircomp.metrics import weighted_sum_rate
from aircomp.model import (MODEL_MAGIC, ModelConfig, ModelFormatError,
                           forward_tape, init_params, load_params,
                           model_forward, save_params)
from aircomp.scenario import ScenarioConfig, sample_realization

from conftest import permute_clusters

TINY = ModelConfig(blocks=2, layers=1, hidden=8, decoder_hidden=(8,))


@pytest.fixture(scope="module")
def tiny_setup(desk_realization):
    return desk_realization, init_params(TINY, seed=1)


def test_sharing_split():
    assert ModelConfig(blocks=6).sharing_split == 3
    assert ModelConfig(blocks=5).sharing_split == 3
    assert ModelConfig(blocks=1).sharing_split == 1


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(blocks=0).validate()
    with pytest.raises(ValueError):
        ModelConfig(hidden=0).validate()


def test_init_deterministic():
    p1 = init_params(TINY, seed=3)
    p2 = init_params(TINY, seed=3)
    for (g1, n1, a1), (g2, n2, a2) in zip(p1.named_parameters(),
                                          p2.named_parameters()):
        assert (g1, n1) == (g2, n2)
        assert np.array_equal(a1, a2)
    p3 = init_params(TINY, seed=4)
    assert any(not np.array_equal(a, b)
               for (_, _, a), (_, _, b) in zip(p1.named_parameters(),
                                               p3.named_parameters()))


def test_forward_power_feasible_and_deterministic(tiny_setup):
    realization, params = tiny_setup
    s1 = model_forward(realization, params)
    s2 = model_forward(realization, params)
    s1.check_power(realization.config)
    for a, b in zip(s1.u, s2.u):
        assert np.array_equal(a, b)


def test_forward_rates_nonnegative(tiny_setup):
    realization, params = tiny_setup
    rep = weighted_sum_rate(model_forward(realization, params), realization)
    assert np.all(rep.rates >= 0.0)


def test_save_load_round_trip(tmp_path, tiny_setup):
    _, params = tiny_setup
    path = tmp_path / "m.udgl"
    save_params(params, path)
    loaded = load_params(path)
    assert loaded.config == params.config
    for (g1, n1, a1), (g2, n2, a2) in zip(params.named_parameters(),
                                          loaded.named_parameters()):
        assert (g1, n1) == (g2, n2)
        assert np.array_equal(a1, a2)


def test_load_rejects_bad_files(tmp_path, tiny_setup):
    _, params = tiny_setup
    good = tmp_path / "m.udgl"
    save_params(params, good)
    raw = good.read_bytes()

    bad_magic = tmp_path / "bad1"
    bad_magic.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ModelFormatError, match="magic"):
        load_params(bad_magic)

    bad_version = tmp_path / "bad2"
    bad_version.write_bytes(MODEL_MAGIC + (99).to_bytes(4, "little") + raw[8:])
    with pytest.raises(ModelFormatError, match="version"):
        load_params(bad_version)

    trailing = tmp_path / "bad3"
    trailing.write_bytes(raw + b"\x00" * 8)
    with pytest.raises(ModelFormatError, match="trailing"):
        load_params(trailing)


def test_permutation_equivariance(tiny_setup):
    realization, params = tiny_setup
    rng = np.random.default_rng(0)
    base = model_forward(realization, params)
    base_R = weighted_sum_rate(base, realization).weighted_sum
    K = realization.config.num_clusters
    for _ in range(3):
        perm = list(rng.permutation(K))
        permuted = permute_clusters(realization, perm)
        out = model_forward(permuted, params)
        for l in range(K):
            assert np.allclose(out.u[l], base.u[perm[l]], atol=1e-9)
            assert np.allclose(out.v[l], base.v[perm[l]], atol=1e-9)
        R = weighted_sum_rate(out, permuted).weighted_sum
        assert R == pytest.approx(base_R, abs=1e-9)


def test_gradient_reaches_every_parameter(tiny_setup):
    realization, params = tiny_setup
    u, vs, graph, groups = forward_tape(realization, params,
                                        detach_lambda=False)
    loss = ad.vsum(ad.mul(u, u))
    ad.backward(loss)
    for gi, group in enumerate(groups):
        for name, val in group.items():
            assert np.any(val.grad != 0.0), (gi, name)


def test_group_selection_respects_split(desk_realization):
    # changing only group 1 must not affect a cascade truncated to group 0
    params = init_params(ModelConfig(blocks=2, layers=1, hidden=8,
                                     decoder_hidden=(8,)), seed=2)
    one_block = init_params(ModelConfig(blocks=1, layers=1, hidden=8,
                                        decoder_hidden=(8,)), seed=0)
    one_block.groups[0] = {k: v.copy() for k, v in params.groups[0].items()}
    out_full = model_forward(desk_realization, params)
    changed = params.copy()
    for name in changed.groups[1]:
        changed.groups[1][name] = changed.groups[1][name] + 0.1
    out_changed = model_forward(desk_realization, changed)
    # group-1 edits must change the final output...
    assert any(not np.array_equal(a, b)
               for a, b in zip(out_full.u, out_changed.u))
    # ...but not the first (group-0) block, which the 1-block model exposes
    mid_a = model_forward(desk_realization, one_block)
    one_block_changed = init_params(ModelConfig(blocks=1, layers=1, hidden=8,
                                                decoder_hidden=(8,)), seed=0)
    one_block_changed.groups[0] = {k: v.copy()
                                   for k, v in changed.groups[0].items()}
    mid_b = model_forward(desk_realization, one_block_changed)
    for a, b in zip(mid_a.u, mid_b.u):
        assert np.array_equal(a, b)
