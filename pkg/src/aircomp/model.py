"""Unfolded graph network mapping channel realizations to transmit designs.

The model cascades `blocks` identical stages. Each stage recomputes the
closed-form receive beamformers and the aligned transmit phases from the
incoming transmit scalars, extracts per-device and per-center features, runs a
heterogeneous message-passing encoder over the device/center graph, and
decodes per-device transmit moduli bounded by the power budget. Parameters
are shared across the first and second halves of the cascade.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .ao import ChannelCache
from .metrics import TransceiverStrategy

FEATURES = 5
FEAT_EPS = 1e-12          # guards ratio features against all-zero gains
FEAT_LOG_SCALE = 0.25     # keeps log-compressed features in tanh's linear range
MODEL_MAGIC = b"UDGL"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    blocks: int = 6
    layers: int = 2                     # message-passing layers per stage
    hidden: int = 32
    decoder_hidden: tuple = (1000, 500, 32)

    def validate(self):
        if self.blocks < 1 or self.layers < 0 or self.hidden < 1:
            raise ValueError("invalid model dimensions")

    @property
    def sharing_split(self):
        """Blocks [0, split) use the first parameter group, the rest the second."""
        return -(-self.blocks // 2)


def _group_param_names(cfg):
    names = ["embed_device", "embed_center"]
    for i in range(cfg.layers):
        names += [f"mix_device_{i}", f"mix_center_{i}",
                  f"ln_gain_device_{i}", f"ln_bias_device_{i}",
                  f"ln_gain_center_{i}", f"ln_bias_center_{i}"]
    widths = (2 * cfg.hidden,) + tuple(cfg.decoder_hidden) + (1,)
    for i in range(len(widths) - 1):
        names += [f"dec_w_{i}", f"dec_b_{i}"]
    return names


@dataclass
class ModelParams:
    config: ModelConfig
    groups: list = field(default_factory=list)  # two dicts name -> ndarray

    def named_parameters(self):
        """(group_index, name, array) in fixed declaration order."""
        order = _group_param_names(self.config)
        for gi, group in enumerate(self.groups):
            for name in order:
                yield gi, name, group[name]

    def copy(self):
        return ModelParams(self.config,
                           [{k: v.copy() for k, v in g.items()} for g in self.groups])


def init_params(cfg, seed=0):
    """Random initialization; LayerNorm affine starts at identity."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    h = cfg.hidden
    widths = (2 * h + FEATURES,) + tuple(cfg.decoder_hidden) + (1,)
    groups = []
    for _ in range(2):
        g = {
            "embed_device": rng.standard_normal((h, FEATURES)) / np.sqrt(FEATURES),
            "embed_center": rng.standard_normal((h, FEATURES)) / np.sqrt(FEATURES),
        }
        for i in range(cfg.layers):
            g[f"mix_device_{i}"] = rng.standard_normal((h, h)) / np.sqrt(h)
            g[f"mix_center_{i}"] = rng.standard_normal((h, h)) / np.sqrt(h)
            g[f"ln_gain_device_{i}"] = np.ones((h, 1))
            g[f"ln_bias_device_{i}"] = np.zeros((h, 1))
            g[f"ln_gain_center_{i}"] = np.ones((h, 1))
            g[f"ln_bias_center_{i}"] = np.zeros((h, 1))
        for i in range(len(widths) - 1):
            g[f"dec_w_{i}"] = rng.standard_normal((widths[i + 1], widths[i])) / np.sqrt(widths[i])
            g[f"dec_b_{i}"] = np.zeros((widths[i + 1], 1))
        groups.append(g)
    return ModelParams(cfg, groups)


# -- model file format ---------------------------------------------------------

def save_params(params, path):
    cfg = params.config
    blobs = b""
    count = 0
    for _, _, arr in params.named_parameters():
        blobs += np.ascontiguousarray(arr, dtype="<f8").tobytes()
        count += 1
    header = struct.pack("<4sIIII", MODEL_MAGIC, MODEL_VERSION,
                         cfg.blocks, cfg.layers, cfg.hidden)
    header += struct.pack("<I", len(cfg.decoder_hidden))
    header += struct.pack(f"<{len(cfg.decoder_hidden)}I", *cfg.decoder_hidden)
    with open(path, "wb") as f:
        f.write(header + blobs)


def load_params(path):
    with open(path, "rb") as f:
        return params_from_bytes(f.read())


def params_from_bytes(raw):
    if raw[:4] != MODEL_MAGIC:
        raise ModelFormatError("bad magic; not a model file")
    version, blocks, layers, hidden = struct.unpack_from("<IIII", raw, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    (n_dec,) = struct.unpack_from("<I", raw, 20)
    dec = struct.unpack_from(f"<{n_dec}I", raw, 24)
    cfg = ModelConfig(blocks, layers, hidden, tuple(dec))
    params = init_params(cfg, seed=0)
    off = 24 + 4 * n_dec
    for gi, name, arr in params.named_parameters():
        n = arr.size
        vals = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
        params.groups[gi][name] = vals.reshape(arr.shape).copy()
        off += 8 * n
    if off != len(raw):
        raise ModelFormatError("trailing bytes after parameter blobs")
    return params


# -- forward pass --------------------------------------------------------------

def _wrap_groups(params):
    return [{k: ad.Value(v) for k, v in g.items()} for g in params.groups]


def _layer_norm_cols(X, gain, bias):
    """LayerNorm across the feature (row) dimension of each column."""
    h = X.data.shape[0]
    mean = ad.mul(ad.vsum(X, axis=0), 1.0 / h)
    centered = ad.sub(X, mean)
    var = ad.mul(ad.vsum(ad.mul(centered, centered), axis=0), 1.0 / h)
    normed = ad.mul(centered, ad.reciprocal(ad.sqrt(ad.add(var, ad.LN_EPS))))
    return ad.add(ad.mul(normed, gain), bias)


class _Graph:
    """Constant per-scenario structure shared by every stage."""

    def __init__(self, realization, noise_power=None):
        cfg = realization.config
        self.cfg = cfg
        self.cache = ChannelCache(realization)
        self.K = cfg.num_clusters
        self.D = self.cache.D
        self.sigma2 = cfg.noise_power if noise_power is None else noise_power
        self.cluster_of = self.cache.cluster_of
        # per-center stacks: H[k] is (D, M_k); rank-one terms for the gram build
        self.outer = []          # outer[k][d]: stacked pair of h h^H at center k
        self.eye = []
        for k in range(self.K):
            Hk = self.cache.H[k]
            terms = []
            for d in range(self.D):
                hh = np.outer(Hk[d], Hk[d].conj())
                terms.append(np.stack([hh.real, hh.imag]))
            self.outer.append(terms)
            m = cfg.antennas[k]
            self.eye.append(np.stack([self.sigma2 * np.eye(m), np.zeros((m, m))]))
        self.own = np.stack([(self.cluster_of == k).astype(float)
                             for k in range(self.K)])        # (K, D) masks
        self.other = 1.0 - self.own


def _beamformers(graph, u, detach_solves):
    """Closed-form receive beamformers for every center, on tape."""
    ur, ui = ad.creal(u), ad.cimag(u)
    power = ad.add(ad.mul(ur, ur), ad.mul(ui, ui))        # |u_d|^2, (D,)
    vs = []
    for k in range(graph.K):
        A = ad.Value(graph.eye[k])
        for d in range(graph.D):
            A = ad.add(A, ad.mul(power[d], ad.Value(graph.outer[k][d])))
        b = None
        Hk = graph.cache.H[k]
        for d in np.flatnonzero(graph.own[k]):
            term = ad.cscale(u[:, int(d)], ad.cpack(Hk[int(d)]))
            b = term if b is None else ad.add(b, term)
        v = ad.hermitian_solve_diff(A, b)
        vs.append(ad.detach(v) if detach_solves else v)
    return vs


def _stage(graph, group, layers, u, detach_solves, detach_lambda):
    """One unfolded stage: beamform, align phases, message-pass, decode."""
    K, sigma2 = graph.K, graph.sigma2
    vs = _beamformers(graph, u, detach_solves)

    gains = [ad.cmatvec_const(graph.cache.H[k].conj(), vs[k]) for k in range(K)]
    mags = [ad.magnitude(gains[k]) for k in range(K)]      # |h^H v_k| per device
    # device features, chosen scale-free so one embedding serves channels
    # whose gains span orders of magnitude:
    #   modulus, within-cluster gain share, interference ratio,
    #   compressed absolute gain, signed misalignment of the own signal
    u_mod = ad.magnitude(u)
    f_own = None
    f_other = None
    g_own = None                                            # h^H v at own center
    for k in range(K):
        own_k = ad.mul(mags[k], ad.Value(graph.own[k]))
        oth_k = ad.mul(mags[k], ad.Value(graph.other[k]))
        go_k = ad.mul(gains[k], ad.Value(graph.own[k]))
        f_own = own_k if f_own is None else ad.add(f_own, own_k)
        f_other = oth_k if f_other is None else ad.add(f_other, oth_k)
        g_own = go_k if g_own is None else ad.add(g_own, go_k)
    cluster_tot = ad.matvec(ad.Value(graph.own), f_own)     # (K,)
    denom = ad.matvec(ad.Value(graph.own.T), cluster_tot)   # (D,) per-device
    share = ad.mul(f_own, ad.reciprocal(ad.add(denom, FEAT_EPS)))
    int_ratio = ad.mul(f_other, ad.reciprocal(
        ad.add(ad.add(f_own, f_other), FEAT_EPS)))
    lg_own = ad.mul(ad.ln(ad.add(f_own, 1.0)), FEAT_LOG_SCALE)
    miss = ad.sub(ad.mul(f_own, u_mod), 1.0)
    dev_feat = ad.stackn([u_mod, share, int_ratio, lg_own, miss])

    # center features (same reasoning): log MSE, compressed own/other gain
    # totals, own signal amplitude sum, noise share of the MSE
    cen_rows = [[] for _ in range(FEATURES)]
    mses = []
    for k in range(K):
        z = ad.cmul(ad.cconj(gains[k]), u)                  # v_k^H h u, all devices
        zr, zi = ad.creal(z), ad.cimag(z)
        err = ad.sub(zr, ad.Value(graph.own[k]))
        noise = ad.mul(ad.vsum(ad.mul(vs[k], vs[k])), sigma2)
        mse = ad.add(ad.vsum(ad.add(ad.mul(err, err), ad.mul(zi, zi))), noise)
        mses.append(mse)
        zmag = ad.magnitude(z)
        cen_rows[0].append(ad.mul(ad.ln(mse), FEAT_LOG_SCALE))
        cen_rows[1].append(ad.mul(ad.ln(ad.add(
            ad.vsum(ad.mul(mags[k], ad.Value(graph.own[k]))), 1.0)),
            FEAT_LOG_SCALE))
        cen_rows[2].append(ad.mul(ad.ln(ad.add(
            ad.vsum(ad.mul(mags[k], ad.Value(graph.other[k]))), 1.0)),
            FEAT_LOG_SCALE))
        cen_rows[3].append(ad.vsum(ad.mul(zmag, ad.Value(graph.own[k]))))
        cen_rows[4].append(ad.mul(noise, ad.reciprocal(mse)))
    cen_feat = ad.stackn([ad.stackn(row) for row in cen_rows])

    # signed aggregation coefficients: +|h^H v| inside the cluster, - outside
    sign = graph.own - graph.other                          # (K, D)
    lam = ad.mul(ad.stackn(mags), ad.Value(sign))           # (K, D): Λ_{d,k} at [k, d]
    if detach_lambda:
        lam = ad.detach(lam)

    Wd = ad.tanh(ad.matmul(group["embed_device"], dev_feat))   # (h, D)
    Wc = ad.tanh(ad.matmul(group["embed_center"], cen_feat))   # (h, K)

    for i in range(layers):
        mixd, mixc = group[f"mix_device_{i}"], group[f"mix_center_{i}"]
        # devices aggregate from centers, then centers from the updated devices
        from_c = ad.matmul(ad.matmul(mixc, Wc), lam)
        Wd = _layer_norm_cols(ad.add(ad.matmul(mixd, Wd), from_c),
                              group[f"ln_gain_device_{i}"],
                              group[f"ln_bias_device_{i}"])
        from_d = ad.matmul(ad.matmul(mixd, Wd), ad.transpose(lam))
        Wc = _layer_norm_cols(ad.add(ad.matmul(mixc, Wc), from_d),
                              group[f"ln_gain_center_{i}"],
                              group[f"ln_bias_center_{i}"])

    # concat each device hidden with its own center's hidden plus a skip of
    # the raw device features, then decode
    gather = graph.own  # (K, D) 0/1: column d selects row cluster_of[d]
    Wc_per_dev = ad.matmul(Wc, ad.Value(gather))
    X = ad.concat([Wd, Wc_per_dev, dev_feat])               # (2h + F, D)
    i = 0
    while f"dec_w_{i}" in group:
        X = ad.add(ad.matmul(group[f"dec_w_{i}"], X), group[f"dec_b_{i}"])
        if f"dec_w_{i + 1}" in group:
            X = ad.selu(X)
        else:
            X = ad.sigmoid(X)
        i += 1
    modulus = ad.mul(X[0], np.sqrt(graph.cfg.max_power))    # (D,) in [0, sqrt P]

    phase = ad.phase_normalize(g_own)
    if detach_solves:
        phase = ad.detach(phase)
    u_next = ad.mul(phase, modulus)
    return u_next, vs, mses


def forward_tape(realization, params, noise_power=None, u_init=None,
                 detach_solves=False, detach_lambda=True, graph=None):
    """Run the full cascade on tape; returns (u pair, beamformer pairs, graph).

    The returned beamformers are recomputed from the final transmit scalars,
    matching the closed form used everywhere else.
    """
    cfg = params.config
    graph = graph or _Graph(realization, noise_power)
    groups = _wrap_groups(params)
    if u_init is None:
        u0 = np.full(graph.D, np.sqrt(realization.config.max_power),
                     dtype=np.complex128)
    else:
        u0 = np.asarray(u_init, dtype=np.complex128)
    u = ad.cpack(u0)
    for j in range(cfg.blocks):
        group = groups[0] if j < cfg.sharing_split else groups[1]
        u, _, _ = _stage(graph, group, cfg.layers, u, detach_solves, detach_lambda)
    vs = _beamformers(graph, u, detach_solves=False)
    # realign transmit phases to the recomputed beamformers (closed form),
    # otherwise the phases stay matched to the previous block's beamformers
    gains = [ad.mul(ad.cmatvec_const(graph.cache.H[k].conj(), vs[k]),
                    ad.Value(graph.own[k])) for k in range(graph.K)]
    g_own = gains[0]
    for g in gains[1:]:
        g_own = ad.add(g_own, g)
    u = ad.mul(ad.phase_normalize(g_own), ad.magnitude(u))
    return u, vs, graph, groups


def model_forward(realization, params, noise_power=None, u_init=None):
    """Inference: plain numpy strategy out, no gradients kept."""
    u, vs, graph, _ = forward_tape(realization, params, noise_power, u_init)
    uf = ad.cunpack(u)
    cfg = realization.config
    u_lists = []
    off = 0
    for k in range(cfg.num_clusters):
        n = cfg.devices_per_cluster[k]
        u_lists.append(uf[off:off + n].copy())
        off += n
    v_lists = [ad.cunpack(v) for v in vs]
    return TransceiverStrategy(u_lists, v_lists)
