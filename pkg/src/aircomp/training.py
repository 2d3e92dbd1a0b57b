"""Unsupervised training of the unfolded network.

The loss is the negative mean weighted sum rate over a batch of sampled
network realizations. Training runs in two stages: the first ignores the
rate clamp so muted clusters still produce gradient, the second applies the
clamp with a zero subgradient in the clamped region. Plain SGD with an
exponentially decayed step size; an adaptive-moment variant is available
behind a flag.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .model import (ModelConfig, ModelFormatError, init_params,
                    params_from_bytes, save_params, _Graph, forward_tape)
from .metrics import weighted_sum_rate
from .scenario import ScenarioConfig, sample_realization

CHECKPOINT_SUFFIX_MAGIC = b"TST1"


class TrainingDivergedError(RuntimeError):
    """Raised when a gradient goes non-finite; carries the last good state."""

    def __init__(self, message, checkpoint, log):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.log = log


@dataclass(frozen=True)
class TrainConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 3000
    batch_size: int = 64
    dataset_size: int = 5000
    lr0: float = 5e-5
    decay: float = 0.9
    decay_interval: int = 100
    stage1_fraction: float = 0.6
    seed: int = 0
    adam: bool = False

    def validate(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 < self.stage1_fraction < 1.0:
            raise ValueError("stage-1 fraction must lie in (0, 1)")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.batch_size < 1 or self.dataset_size < 1:
            raise ValueError("batch and dataset sizes must be positive")
        if self.decay_interval < 1 or not 0.0 < self.decay <= 1.0:
            raise ValueError("invalid decay schedule")


@dataclass
class TrainLog:
    epoch: list = field(default_factory=list)
    stage: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    mean_loss: list = field(default_factory=list)
    mean_rate: list = field(default_factory=list)

    def append(self, epoch, stage, lr, mean_loss, mean_rate):
        self.epoch.append(epoch)
        self.stage.append(stage)
        self.lr.append(lr)
        self.mean_loss.append(mean_loss)
        self.mean_rate.append(mean_rate)

    def to_csv(self, path):
        from .harness import schema_line
        with open(path, "w", newline="") as f:
            f.write(schema_line("training") + "\n")
            w = csv.writer(f)
            w.writerow(["epoch", "stage", "lr", "mean_loss", "mean_R"])
            for row in zip(self.epoch, self.stage, self.lr,
                           self.mean_loss, self.mean_rate):
                w.writerow(row)


def learning_rate(cfg, epoch):
    return cfg.lr0 * cfg.decay ** (epoch // cfg.decay_interval)


def make_dataset(scenario, count, master_seed):
    """Realizations and their per-sample graph structure, seeded reproducibly."""
    if not isinstance(master_seed, np.random.SeedSequence):
        master_seed = np.random.SeedSequence(master_seed)
    seeds = master_seed.generate_state(count)
    out = []
    for s in seeds:
        r = sample_realization(scenario, int(s))
        out.append((r, _Graph(r)))
    return out


def _rate_coeffs(cfg):
    K = cfg.num_clusters
    return np.array([cfg.weights[k] / (cfg.quant_bits[k]
                                       + np.log2(cfg.devices_per_cluster[k]))
                     for k in range(K)])


def sample_loss(realization, graph, params, stage):
    """Negative weighted sum rate of one sample, on tape.

    Returns (loss Value, wrapped parameter groups, raw and clamped rates).
    """
    u, vs, graph, groups = forward_tape(realization, params, graph=graph)
    cfg = realization.config
    coeff = _rate_coeffs(cfg)
    rate = None
    raw = clamped = 0.0
    for k in range(graph.K):
        gains = ad.cmatvec_const(graph.cache.H[k].conj(), vs[k])
        z = ad.cmul(ad.cconj(gains), u)       # v_k^H h u per device
        zr, zi = ad.creal(z), ad.cimag(z)
        err = ad.sub(zr, ad.Value(graph.own[k]))
        noise = ad.mul(ad.vsum(ad.mul(vs[k], vs[k])), graph.sigma2)
        mse = ad.add(ad.vsum(ad.add(ad.mul(err, err), ad.mul(zi, zi))), noise)
        rk = ad.log2(ad.reciprocal(mse))
        raw += coeff[k] * float(rk.data)
        clamped += coeff[k] * max(0.0, float(rk.data))
        if stage == 2:
            rk = ad.positive_part(rk)
        term = ad.mul(rk, coeff[k])
        rate = term if rate is None else ad.add(rate, term)
    return ad.neg(rate), groups, raw, clamped


def batch_gradients(batch, params, stage):
    """Mean gradient over a batch; also the stage-1/2 losses and mean rate."""
    grads = None
    loss1 = loss2 = rate_sum = 0.0
    scale = 1.0 / len(batch)
    for idx, (realization, graph) in enumerate(batch):
        try:
            loss, groups, raw, clamped = sample_loss(realization, graph,
                                                     params, stage)
            ad.backward(loss)
        except FloatingPointError as e:
            raise FloatingPointError(f"non-finite value on sample {idx}: {e}")
        loss1 += -raw * scale
        loss2 += -clamped * scale
        rate_sum += clamped * scale
        if grads is None:
            grads = [{k: np.zeros_like(v) for k, v in g.items()}
                     for g in params.groups]
        for gi, group in enumerate(groups):
            for name, val in group.items():
                grads[gi][name] += scale * val.grad
    # clamping can only discard negative rate terms, so -R can only shrink
    assert loss2 <= loss1 + 1e-12
    batch_loss = loss1 if stage == 1 else loss2
    return grads, batch_loss, rate_sum


def train(cfg, init=None):
    """Two-stage SGD; returns (ModelParams, TrainLog).

    With `init` given, continues from those parameters (fine-tuning).
    Raises TrainingDivergedError carrying the last finite parameters if a
    gradient goes non-finite.
    """
    cfg.validate()
    ss_data, ss_order = np.random.SeedSequence(cfg.seed).spawn(2)
    dataset = make_dataset(cfg.scenario, cfg.dataset_size, ss_data)
    rng = np.random.default_rng(ss_order)
    params = init.copy() if init is not None else init_params(cfg.model,
                                                              cfg.seed)
    log = TrainLog()
    stage_switch = int(round(cfg.stage1_fraction * cfg.epochs))
    moments = None
    if cfg.adam:
        moments = [[{k: np.zeros_like(v) for k, v in g.items()}
                    for g in params.groups] for _ in range(2)]
    step = 0
    for epoch in range(cfg.epochs):
        lr = learning_rate(cfg, epoch)
        stage = 1 if epoch < stage_switch else 2
        order = rng.permutation(len(dataset))
        ep_loss = ep_rate = 0.0
        n_batches = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [dataset[i] for i in order[lo:lo + cfg.batch_size]]
            grads, batch_loss, batch_rate = batch_gradients(batch, params,
                                                            stage)
            for gi in range(2):
                for name in grads[gi]:
                    if not np.all(np.isfinite(grads[gi][name])):
                        raise TrainingDivergedError(
                            f"non-finite gradient in {name} at epoch {epoch}",
                            params.copy(), log)
            step += 1
            for gi in range(2):
                for name, g in grads[gi].items():
                    if cfg.adam:
                        m, v = moments[0][gi][name], moments[1][gi][name]
                        m *= 0.9
                        m += 0.1 * g
                        v *= 0.999
                        v += 0.001 * g * g
                        mh = m / (1 - 0.9 ** step)
                        vh = v / (1 - 0.999 ** step)
                        params.groups[gi][name] -= lr * mh / (np.sqrt(vh) + 1e-8)
                    else:
                        params.groups[gi][name] -= lr * g
            ep_loss += batch_loss
            ep_rate += batch_rate
            n_batches += 1
        log.append(epoch, stage, lr, ep_loss / n_batches, ep_rate / n_batches)
    return params, log


@dataclass
class EvalSummary:
    mean_rate: float
    per_cluster_mean: np.ndarray
    quantiles: dict          # {0.05, 0.25, 0.5, 0.75, 0.95} -> R quantile
    rates: np.ndarray        # per-sample weighted sum rates


def evaluate(forward, realizations):
    """Aggregate weighted sum rates of `forward(realization) -> strategy`."""
    if not realizations:
        raise ValueError("empty evaluation set")
    rates = []
    per_cluster = []
    for r in realizations:
        report = weighted_sum_rate(forward(r), r)
        rates.append(report.weighted_sum)
        per_cluster.append(report.rates)
    rates = np.array(rates)
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    return EvalSummary(float(rates.mean()),
                       np.mean(per_cluster, axis=0),
                       {q: float(np.quantile(rates, q)) for q in qs},
                       rates)


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path, params, epoch, lr, stage, seed):
    save_params(params, path)
    suffix = CHECKPOINT_SUFFIX_MAGIC + struct.pack("<IIQd", epoch, stage,
                                                   seed, lr)
    with open(path, "ab") as f:
        f.write(suffix)


def load_checkpoint(path):
    with open(path, "rb") as f:
        raw = f.read()
    tail = raw[-28:]
    if tail[:4] != CHECKPOINT_SUFFIX_MAGIC:
        raise ModelFormatError("missing training-state suffix")
    epoch, stage, seed, lr = struct.unpack("<IIQd", tail[4:])
    params = params_from_bytes(raw[:-28])
    return params, {"epoch": epoch, "stage": stage, "seed": seed, "lr": lr}
