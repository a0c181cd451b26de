"""Dense layer helpers shared by every model block.

Weights are stored input-major (``fan_in x fan_out``) so a layer is
``x @ W + b``.
"""
import numpy as np

from . import autodiff as ad


def init_linear(rng, fan_in, fan_out, bias=True, dtype=np.float64):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and bias."""
    bound = 1.0 / np.sqrt(fan_in)
    out = {"w": rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)}
    if bias:
        out["b"] = rng.uniform(-bound, bound, size=(fan_out,)).astype(dtype)
    return out


def add_linear(store, prefix, rng, fan_in, fan_out, bias=True, dtype=np.float64):
    for key, value in init_linear(rng, fan_in, fan_out, bias, dtype).items():
        store.add(f"{prefix}.{key}", value)


def linear(x, store, prefix):
    y = x @ store[f"{prefix}.w"]
    bkey = f"{prefix}.b"
    if bkey in store:
        y = y + store[bkey]
    return y


def add_mlp(store, prefix, rng, widths, dtype=np.float64):
    """Register a stack of linear layers ``widths[0] -> ... -> widths[-1]``."""
    for k, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        add_linear(store, f"{prefix}.{k}", rng, a, b, dtype=dtype)


def mlp(x, store, prefix, depth, act=ad.gelu):
    """Apply a stack of ``depth`` linear layers with ``act`` between them."""
    for k in range(depth):
        x = linear(x, store, f"{prefix}.{k}")
        if k < depth - 1:
            x = act(x)
    return x
