"""Global multi-head linear attention over all nodes.

Per head, keys and values are instance-normalised and contracted into a
``d_h x d_h`` kernel ``G = sum_j k_j^T v_j / N``; each query row is then
multiplied by ``G``. No ``N x N`` matrix is ever formed.
"""
import numpy as np

from . import autodiff as ad
from .nn import add_linear, linear

NORM_EPS = 1e-5


def init_attention(store, prefix, rng, channels, heads=4, head_dim=16, final_proj=True,
                   dtype=np.float64):
    bound = 1.0 / np.sqrt(channels)
    for k in range(heads):
        for name in ("wq", "wk", "wv"):
            store.add(f"{prefix}.head{k}.{name}",
                      rng.uniform(-bound, bound, (channels, head_dim)).astype(dtype))
    add_linear(store, f"{prefix}.out", rng, heads * head_dim, channels, dtype=dtype)
    if final_proj:
        add_linear(store, f"{prefix}.proj", rng, channels, channels, dtype=dtype)


def num_heads(store, prefix):
    k = 0
    while f"{prefix}.head{k}.wq" in store:
        k += 1
    return k


def instance_norm(z, eps=NORM_EPS):
    """Standardise each column over the point axis (no affine terms)."""
    z = ad.as_tensor(z)
    centred = z - ad.mean(z, axis=0, keepdims=True)
    var = ad.mean(ad.square(centred), axis=0, keepdims=True)
    return centred / ad.sqrt(var + eps)


def head_apply(h, store, prefix, head):
    h = ad.as_tensor(h)
    p = f"{prefix}.head{head}"
    q = h @ store[f"{p}.wq"]
    k = instance_norm(h @ store[f"{p}.wk"])
    v = instance_norm(h @ store[f"{p}.wv"])
    kernel = (ad.transpose(k) @ v) * (1.0 / h.shape[0])
    return q @ kernel


def multi_head(h, store, prefix):
    h = ad.as_tensor(h)
    w = store[f"{prefix}.head0.wq"]
    if h.shape[1] != w.shape[0]:
        raise ad.ShapeError(f"multi_head: features {h.shape} vs projection {w.shape}")
    heads = [head_apply(h, store, prefix, k) for k in range(num_heads(store, prefix))]
    out = linear(ad.concat(heads, axis=1), store, f"{prefix}.out")
    if f"{prefix}.proj.w" in store:
        out = linear(out, store, f"{prefix}.proj")
    return out
