"""Message passing with moment aggregation.

Each block computes an edge message ``g([h_i, h_j, e_ij])`` for every edge
``(i, j)``, summarises node ``i``'s incoming messages by their mean, max,
min and standard deviation, then updates ``h_i <- gamma([h_i, summary])``
followed by residual MLPs.
"""
import numpy as np

from . import autodiff as ad
from .nn import add_mlp, mlp

STD_EPS = 1e-8


def init_block(store, prefix, rng, channels, edge_dim, residual_depth=2, dtype=np.float64):
    c = channels
    add_mlp(store, f"{prefix}.g", rng, [2 * c + edge_dim, c, c], dtype)
    add_mlp(store, f"{prefix}.gamma", rng, [5 * c, c, c], dtype)
    for r in range(residual_depth):
        add_mlp(store, f"{prefix}.res{r}", rng, [c, c, c], dtype)


def residual_depth(store, prefix):
    r = 0
    while f"{prefix}.res{r}.0.w" in store:
        r += 1
    return r


def messages(h, graph, store, prefix):
    """Per-edge messages ``m_ij = g(h_i, h_j, e_ij)``, shape ``E x C``."""
    h = ad.as_tensor(h)
    c = h.shape[1]
    w0 = store[f"{prefix}.g.0.w"]
    if graph.edge_attr is None:
        raise ValueError("messages: graph has no edge attributes")
    if w0.shape[0] != 2 * c + graph.edge_attr.shape[1] or h.shape[0] != graph.num_nodes:
        raise ad.ShapeError(f"messages: h {h.shape}, edge_attr {graph.edge_attr.shape}, "
                            f"first layer {w0.shape}")
    # First layer split by input block: node terms are projected once per node.
    recv = ad.gather(h @ w0[:c], graph.receivers)
    send = ad.gather(h @ w0[c:2 * c], graph.senders)
    edge = ad.as_tensor(graph.edge_attr, h.dtype) @ w0[2 * c:]
    z = ad.gelu(recv + send + edge + store[f"{prefix}.g.0.b"])
    return z @ store[f"{prefix}.g.1.w"] + store[f"{prefix}.g.1.b"]


def aggregate(m, graph):
    """Concatenated (mean, max, min, std) of incoming messages, ``N x 4C``.

    Nodes without neighbours get an all-zero row.
    """
    m = ad.as_tensor(m)
    n = graph.num_nodes
    recv = graph.receivers
    deg = np.maximum(graph.degree, 1).astype(m.dtype)[:, None]
    mean = ad.scatter_add(m, recv, n) / deg
    if graph.num_edges == 0:
        top = bottom = mean
    else:
        index, mask = graph.padded
        stacked = ad.gather(m, index)
        mask3 = mask[:, :, None]
        top = ad.max(stacked, axis=1, mask=mask3)
        bottom = ad.min(stacked, axis=1, mask=mask3)
    centred = m - ad.gather(mean, recv)
    var = ad.scatter_add(ad.square(centred), recv, n) / deg
    std = ad.sqrt(var + STD_EPS) - np.sqrt(STD_EPS)
    return ad.concat([mean, top, bottom, std], axis=1)


def update(h, m_hat, store, prefix):
    """``gamma([h, m_hat])`` followed by ``h <- h + MLP(h)`` residual blocks."""
    h = ad.as_tensor(h)
    m_hat = ad.as_tensor(m_hat)
    if m_hat.shape != (h.shape[0], 4 * h.shape[1]):
        raise ad.ShapeError(f"update: h {h.shape} vs aggregate {m_hat.shape}")
    out = mlp(ad.concat([h, m_hat], axis=1), store, f"{prefix}.gamma", 2)
    for r in range(residual_depth(store, prefix)):
        out = out + mlp(out, store, f"{prefix}.res{r}", 2)
    return out


def block(h, graph, store, prefix):
    return update(h, aggregate(messages(h, graph, store, prefix), graph), store, prefix)
