"""Neighbourhood attention update with edge features, plus the output head."""
import numpy as np

from . import autodiff as ad
from .nn import add_linear, linear


def init_gat(store, prefix, rng, channels, edge_dim, dtype=np.float64):
    bound = 1.0 / np.sqrt(channels)
    for name in ("w1", "w2", "w4", "w5", "ws"):
        store.add(f"{prefix}.{name}", rng.uniform(-bound, bound, (channels, channels)).astype(dtype))
    eb = 1.0 / np.sqrt(edge_dim)
    store.add(f"{prefix}.w3", rng.uniform(-eb, eb, (edge_dim, channels)).astype(dtype))


def init_head(store, prefix, rng, channels, targets=1, dtype=np.float64):
    add_linear(store, prefix, rng, channels, targets, dtype=dtype)


def _edge_term(graph, store, prefix, dtype):
    return ad.as_tensor(graph.edge_attr, dtype) @ store[f"{prefix}.w3"]


def segment_softmax(logits, graph):
    """Softmax of per-edge scores over each receiving node's incoming edges."""
    if graph.num_edges == 0:
        return logits
    index, mask = graph.padded
    probs = ad.softmax(ad.gather(logits, index), axis=1, mask=mask)
    flat = ad.reshape(probs, (-1,))
    return ad.gather(flat, np.flatnonzero(mask))


def attention_coeffs(h, graph, store, prefix, edge_term=None):
    """Scaled dot-product coefficients ``alpha_ij``, one per edge."""
    h = ad.as_tensor(h)
    if h.shape[0] != graph.num_nodes:
        raise ad.ShapeError(f"attention_coeffs: h {h.shape} vs {graph.num_nodes} nodes")
    if edge_term is None:
        edge_term = _edge_term(graph, store, prefix, h.dtype)
    query = ad.gather(h @ store[f"{prefix}.w4"], graph.receivers)
    key = ad.gather(h @ store[f"{prefix}.w5"], graph.senders) + edge_term
    logits = ad.sum(query * key, axis=1) * (1.0 / np.sqrt(h.shape[1]))
    return segment_softmax(logits, graph)


def gat_update(h, alpha, graph, store, prefix, edge_term=None):
    """``W1 h_i + sum_j alpha_ij (W2 h_j + W3 e_ij) + Ws h_i``."""
    h = ad.as_tensor(h)
    alpha = ad.as_tensor(alpha, h.dtype)
    if alpha.shape != (graph.num_edges,):
        raise ad.ShapeError(f"gat_update: alpha {alpha.shape} vs {graph.num_edges} edges")
    if edge_term is None:
        edge_term = _edge_term(graph, store, prefix, h.dtype)
    value = ad.gather(h @ store[f"{prefix}.w2"], graph.senders) + edge_term
    weighted = ad.reshape(alpha, (-1, 1)) * value
    agg = ad.scatter_add(weighted, graph.receivers, graph.num_nodes)
    out = h @ store[f"{prefix}.w1"] + agg
    return out + h @ store[f"{prefix}.ws"]


def gat_layer(h, graph, store, prefix):
    h = ad.as_tensor(h)
    edge_term = _edge_term(graph, store, prefix, h.dtype)
    alpha = attention_coeffs(h, graph, store, prefix, edge_term)
    return gat_update(h, alpha, graph, store, prefix, edge_term)


def predict(h, store, prefix):
    return linear(h, store, prefix)
