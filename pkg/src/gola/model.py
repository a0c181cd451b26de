"""End-to-end GOLA network and the GKN / GCN baselines.

All three models share one call signature::

    forward(params, coords, f_values, graph) -> N x 1 prediction

where ``graph`` already carries edge attributes built from the same
``coords`` and ``f_values``. Parameters live in a single
:class:`~gola.autodiff.ParamStore`; block structure is recovered from the
parameter names, so a loaded checkpoint needs no separate architecture file.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import autodiff as ad
from . import attention, gatlayer, msgpass, spectral
from .autodiff import ParamStore
from .nn import add_linear, add_mlp, linear, mlp
from .pdedata import read_container, write_container

MODEL_KINDS = ("gola", "gkn", "gcn")


@dataclass
class GolaConfig:
    modes: int = 64
    channels: int = 64
    heads: int = 4
    head_dim: int = 16
    msgpass_blocks: int = 3
    residual_depth: int = 2
    gat_layers: int = 1
    final_proj: bool = True
    freq_jitter: float = 0.01
    # also feed the point coordinates to the Fourier encoder, as the baselines' lift does
    encode_coords: bool = False
    # radius policy: a fixed radius wins over the density-adaptive target degree
    radius: float | None = None
    target_degree: float = 10.0
    seed: int = 0
    precision: str = "float32"
    # baselines
    baseline_channels: int = 32
    baseline_layers: int = 4
    kernel_width: int = 16

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("radius", "freq_jitter", "seed", "final_proj", "precision", "residual_depth",
                          "encode_coords"):
                continue
            if not v > 0:
                raise ValueError(f"GolaConfig.{f.name} must be positive, got {v!r}")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("GolaConfig.radius must be positive when set")
        if self.precision not in ("float32", "float64"):
            raise ValueError("GolaConfig.precision must be 'float32' or 'float64'")

    @property
    def dtype(self):
        return np.dtype(self.precision)

    def to_dict(self):
        return asdict(self)


def edge_dim(c_in):
    return 4 + 2 * c_in


# -------------------------------------------------------------------- GOLA

def init_gola(config: GolaConfig, c_in=1, c_target=1, rng=None):
    rng = rng or np.random.Generator(np.random.PCG64(config.seed))
    dt = config.dtype
    c, de = config.channels, edge_dim(c_in)
    store = ParamStore()
    store.add("enc.omega", spectral.init_frequencies(config.modes, rng, config.freq_jitter, dt))
    wr, wi = spectral.init_weights(c_in + 2 * config.encode_coords, c, config.modes, rng, dt)
    store.add("enc.w_real", wr)
    store.add("enc.w_imag", wi)
    for b in range(config.msgpass_blocks):
        msgpass.init_block(store, f"mp{b}", rng, c, de, config.residual_depth, dt)
    attention.init_attention(store, "attn", rng, c, config.heads, config.head_dim, config.final_proj, dt)
    for g in range(config.gat_layers):
        gatlayer.init_gat(store, f"gat{g}", rng, c, de, dt)
    gatlayer.init_head(store, "head", rng, c, c_target, dt)
    return store


def _count_prefix(store, fmt):
    k = 0
    while any(n.startswith(fmt.format(k) + ".") for n in store.names()):
        k += 1
    return k


def _as_columns(f_values):
    f = np.asarray(f_values)
    return f[:, None] if f.ndim == 1 else f


def gola_forward(params, coords, f_values, graph):
    dt = params["enc.omega"].dtype
    f = ad.as_tensor(_as_columns(f_values).astype(dt))
    x = np.asarray(coords, dtype=dt)
    n = x.shape[0]
    if params["enc.w_real"].shape[0] == f.shape[1] + 2:
        # encoder was built with encode_coords: its inputs are (f, x)
        f = ad.concat([f, ad.as_tensor(x)], axis=1)
    # B = 1 batched encoder layout: f is 1 x C_in x N.
    fb = ad.reshape(ad.transpose(f), (1, f.shape[1], n))
    h = spectral.encode(fb, x[None], params["enc.omega"], (params["enc.w_real"], params["enc.w_imag"]))
    h = ad.transpose(ad.reshape(h, h.shape[1:]))
    for b in range(_count_prefix(params, "mp{}")):
        h = msgpass.block(h, graph, params, f"mp{b}")
    h = attention.multi_head(h, params, "attn")
    for g in range(_count_prefix(params, "gat{}")):
        h = gatlayer.gat_layer(h, graph, params, f"gat{g}")
    return gatlayer.predict(h, params, "head")


# --------------------------------------------------------------------- GKN

def init_gkn(config: GolaConfig, c_in=1, c_target=1, rng=None):
    rng = rng or np.random.Generator(np.random.PCG64(config.seed))
    dt = config.dtype
    c, de = config.baseline_channels, edge_dim(c_in)
    store = ParamStore()
    add_linear(store, "lift", rng, 2 + c_in, c, dtype=dt)
    for t in range(config.baseline_layers):
        add_linear(store, f"gkn{t}.w", rng, c, c, dtype=dt)
        add_mlp(store, f"gkn{t}.kernel", rng, [de, config.kernel_width, c * c], dt)
        # Kernel output scaled so kappa(e) h starts with O(1) gain.
        store[f"gkn{t}.kernel.1.w"].data *= 1.0 / np.sqrt(c)
        store[f"gkn{t}.kernel.1.b"].data *= 1.0 / np.sqrt(c)
    add_linear(store, "proj", rng, c, c_target, dtype=dt)
    return store


def gkn_forward(params, coords, f_values, graph, activation=ad.gelu):
    """``h <- act(W h_i + mean_j kappa(e_ij) h_j)`` layers between linear lift and projection."""
    dt = params["lift.w"].dtype
    f = _as_columns(f_values).astype(dt)
    h = linear(np.concatenate([np.asarray(coords, dtype=dt), f], axis=1), params, "lift")
    c = h.shape[1]
    e = ad.as_tensor(graph.edge_attr, dt)
    deg = np.maximum(graph.degree, 1).astype(dt)[:, None]
    for t in range(_count_prefix(params, "gkn{}")):
        kernel = ad.reshape(mlp(e, params, f"gkn{t}.kernel", 2), (-1, c, c))
        hj = ad.reshape(ad.gather(h, graph.senders), (-1, c, 1))
        msg = ad.reshape(kernel @ hj, (-1, c))
        agg = ad.scatter_add(msg, graph.receivers, graph.num_nodes) / deg
        h = activation(linear(h, params, f"gkn{t}.w") + agg)
    return linear(h, params, "proj")


# --------------------------------------------------------------------- GCN

def init_gcn(config: GolaConfig, c_in=1, c_target=1, rng=None):
    rng = rng or np.random.Generator(np.random.PCG64(config.seed))
    dt = config.dtype
    c = config.baseline_channels
    store = ParamStore()
    add_linear(store, "lift", rng, 2 + c_in, c, dtype=dt)
    for t in range(config.baseline_layers):
        add_linear(store, f"gcn{t}.self", rng, c, c, dtype=dt)
        add_linear(store, f"gcn{t}.nbr", rng, c, c, bias=False, dtype=dt)
    add_linear(store, "proj", rng, c, c_target, dtype=dt)
    return store


def gcn_forward(params, coords, f_values, graph, activation=ad.gelu):
    """Mean-neighbour convolution ``act(W_self h_i + W_nbr mean_j h_j + b)``."""
    dt = params["lift.w"].dtype
    f = _as_columns(f_values).astype(dt)
    h = linear(np.concatenate([np.asarray(coords, dtype=dt), f], axis=1), params, "lift")
    deg = np.maximum(graph.degree, 1).astype(dt)[:, None]
    for t in range(_count_prefix(params, "gcn{}")):
        nbr = ad.scatter_add(ad.gather(h, graph.senders), graph.receivers, graph.num_nodes) / deg
        h = activation(linear(h, params, f"gcn{t}.self") + nbr @ params[f"gcn{t}.nbr.w"])
    return linear(h, params, "proj")


INIT = {"gola": init_gola, "gkn": init_gkn, "gcn": init_gcn}
FORWARD = {"gola": gola_forward, "gkn": gkn_forward, "gcn": gcn_forward}


def init_params(kind, config: GolaConfig, c_in=1, c_target=1):
    if kind not in INIT:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    return INIT[kind](config, c_in, c_target)


def forward(kind, params, coords, f_values, graph):
    return FORWARD[kind](params, coords, f_values, graph)


def param_count(params: ParamStore):
    return params.count()


def save_checkpoint(path, params: ParamStore, metadata=None):
    meta = dict(metadata or {})
    meta["params"] = params.names()
    write_container(path, meta, params.arrays())


def load_checkpoint(path):
    meta, arrays = read_container(path)
    params = ParamStore({name: arrays[name] for name in meta["params"]})
    return params, meta
