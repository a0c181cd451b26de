"""Learnable non-uniform Fourier encoder.

Scattered samples ``f`` at points ``x`` are projected onto complex
exponentials ``exp(2 pi i <omega_m, x>)`` with learnable frequencies,
mixed per mode by complex weights, and synthesised back at the same points.
Complex arrays are (real, imag) pairs of :class:`~gola.autodiff.Tensor`.

Shapes follow the batched layout: points ``B x N x 2``, features
``B x C x N``, coefficients ``B x C x M``, basis ``B x N x M``.
"""
import numpy as np

from . import autodiff as ad


def lattice_frequencies(num_modes):
    """The ``num_modes`` integer vectors of smallest norm, sign pairs adjacent."""
    radius = int(np.ceil(np.sqrt(num_modes))) + 1
    ks = [(a, b) for a in range(-radius, radius + 1) for b in range(-radius, radius + 1)]

    def key(k):
        rep = max(k, (-k[0], -k[1]))
        return (k[0] ** 2 + k[1] ** 2, rep, k != rep)

    ks.sort(key=key)
    return np.array(ks[:num_modes], dtype=np.float64)


def init_frequencies(num_modes, rng, jitter=0.01, dtype=np.float64):
    omegas = lattice_frequencies(num_modes)
    if jitter:
        omegas = omegas + rng.normal(0.0, jitter, size=omegas.shape)
    return omegas.astype(dtype)


def init_weights(c_in, c_out, num_modes, rng, dtype=np.float64):
    bound = 1.0 / np.sqrt(c_in * num_modes)
    shape = (c_in, c_out, num_modes)
    return (rng.uniform(-bound, bound, shape).astype(dtype),
            rng.uniform(-bound, bound, shape).astype(dtype))


def basis(coords, omegas):
    """``Phi[b, i, m] = exp(2 pi i <omega_m, x_i^(b)>)`` as (real, imag)."""
    coords = ad.as_tensor(coords, getattr(omegas, "dtype", None))
    if coords.ndim == 2:
        coords = ad.reshape(coords, (1,) + coords.shape)
    theta = (2.0 * np.pi) * (coords @ ad.transpose(ad.as_tensor(omegas)))
    return ad.cos(theta), ad.sin(theta)


def forward_coefficients(f, phi):
    """``u_hat[b, c, m] = (1/N) sum_i f[b, c, i] conj(Phi[b, i, m])``."""
    phi_r, phi_i = phi
    f = ad.as_tensor(f, phi_r.dtype)
    n = phi_r.shape[-2]
    if f.ndim != 3 or f.shape[-1] != n:
        raise ad.ShapeError(f"forward_coefficients: f {f.shape} does not match basis {phi_r.shape}")
    scale = 1.0 / n
    return (f @ phi_r) * scale, (f @ phi_i) * (-scale)


def filter(u_hat, weights):  # noqa: A001
    """``v_hat[b, o, m] = sum_c u_hat[b, c, m] W[c, o, m]`` (complex)."""
    ur, ui = u_hat
    wr, wi = weights
    if ur.shape[1] != wr.shape[0] or ur.shape[2] != wr.shape[2]:
        raise ad.ShapeError(f"filter: coefficients {ur.shape} vs weights {wr.shape}")
    b, c, m = ur.shape
    ur = ad.reshape(ur, (b, c, 1, m))
    ui = ad.reshape(ui, (b, c, 1, m))
    pr, pi = ad.complex_mul(ur, ui, wr, wi)
    return ad.sum(pr, axis=1), ad.sum(pi, axis=1)


def inverse(v_hat, phi):
    """``h = Re(sum_m v_hat[b, o, m] Phi[b, i, m])``, shape ``B x C_out x N``."""
    vr, vi = v_hat
    phi_r, phi_i = phi
    return vr @ ad.transpose(phi_r, (0, 2, 1)) - vi @ ad.transpose(phi_i, (0, 2, 1))


def encode(f, coords, omegas, weights):
    phi = basis(coords, omegas)
    return inverse(filter(forward_coefficients(f, phi), weights), phi)
