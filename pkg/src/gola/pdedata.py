"""Benchmark PDE datasets on a uniform grid and their binary container.

Grids are ``grid_res x grid_res`` with node ``(i1, i2)`` at
``(i1, i2) / (grid_res - 1)``. Periodic problems (advection, nonlinear
diffusion) and all random fields live on the ``grid_res - 1`` unique nodes
of the unit torus; the last row and column repeat the first.

Container layout (all integers little-endian)::

    b"GOLA" | u32 version | u32 metadata length | metadata JSON (utf-8)
    | float32 arrays in the order listed under metadata["arrays"]
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .geometry import sample_points

MAGIC = b"GOLA"
VERSION = 1
PDE_TAGS = ("darcy", "advection", "eikonal", "nonlinear_diffusion")


class SolverError(RuntimeError):
    pass


class ContainerError(ValueError):
    code = "container error"

    def __init__(self, message):
        super().__init__(f"{self.code}: {message}")


class BadMagicError(ContainerError):
    code = "bad magic"


class VersionMismatchError(ContainerError):
    code = "version mismatch"


class TruncatedPayloadError(ContainerError):
    code = "truncated payload"


@dataclass
class GrfSpec:
    grid_res: int = 128
    tau: float = 3.0
    alpha: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0 or self.alpha <= 1:
            raise ValueError(f"GRF needs tau > 0 and alpha > 1, got tau={self.tau}, alpha={self.alpha}")
        if self.grid_res < 3:
            raise ValueError("grid_res must be at least 3")


@dataclass
class FieldPair:
    f_grid: np.ndarray
    u_grid: np.ndarray
    pde_tag: str
    gen_metadata: dict = field(default_factory=dict)


@dataclass
class Dataset:
    pde_tag: str
    grid_res: int
    f: np.ndarray
    u: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.f)

    def pair(self, k):
        return FieldPair(self.f[k], self.u[k], self.pde_tag, self.metadata.get("pairs", [{}] * len(self))[k])

    @classmethod
    def from_pairs(cls, pairs, extra=None):
        f = np.stack([p.f_grid for p in pairs]).astype(np.float32)
        u = np.stack([p.u_grid for p in pairs]).astype(np.float32)
        meta = {
            "pde_tag": pairs[0].pde_tag,
            "grid_res": int(f.shape[1]),
            "count": len(pairs),
            "pairs": [p.gen_metadata for p in pairs],
            # Scale statistics used to condition training; targets are only rescaled.
            "f_mean": float(f.astype(np.float64).mean()),
            "f_std": float(f.astype(np.float64).std()),
            "u_std": float(u.astype(np.float64).std()),
        }
        meta.update(extra or {})
        return cls(pairs[0].pde_tag, int(f.shape[1]), f, u, meta)


# ------------------------------------------------------------------ fields

def _torus_to_grid(a):
    return np.pad(a, ((0, 1), (0, 1)), mode="wrap")


def _grid_to_torus(a):
    return a[:-1, :-1]


def grf_sqrt_spectrum(n, tau, alpha):
    k = np.fft.fftfreq(n, d=1.0 / n)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    return tau ** (alpha - 1.0) * (4.0 * np.pi ** 2 * k2 + tau ** 2) ** (-alpha / 2.0)


def sample_grf(spec: GrfSpec, rng=None):
    """Draw from N(0, tau^(2 alpha - 2) (-Laplacian + tau^2)^(-alpha)) on the periodic grid.

    ``rng`` overrides the generator seeded from ``spec.seed``.
    """
    n = spec.grid_res - 1
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
    white = rng.standard_normal((n, n))
    field_ = np.real(np.fft.ifft2(np.fft.fft2(white) * grf_sqrt_spectrum(n, spec.tau, spec.alpha))) * n
    return _torus_to_grid(field_)


def _pair_rngs(seed, n):
    children = np.random.SeedSequence(seed).spawn(n)
    return [(int(c.generate_state(1, np.uint64)[0]), np.random.Generator(np.random.PCG64(c))) for c in children]


# ------------------------------------------------------------------- darcy

def darcy_matrix(a):
    """5-point operator for -div(a grad u) on interior nodes, zero Dirichlet."""
    res = a.shape[0]
    h = 1.0 / (res - 1)
    m = res - 2
    idx = np.arange(m * m).reshape(m, m)
    ai = a[1:-1, 1:-1]
    # Face coefficients: arithmetic mean of nodal values.
    east = 0.5 * (ai + a[2:, 1:-1])
    west = 0.5 * (ai + a[:-2, 1:-1])
    north = 0.5 * (ai + a[1:-1, 2:])
    south = 0.5 * (ai + a[1:-1, :-2])
    diag = (east + west + north + south).ravel()
    links = (
        (idx[:-1, :], idx[1:, :], east[:-1, :]),
        (idx[1:, :], idx[:-1, :], west[1:, :]),
        (idx[:, :-1], idx[:, 1:], north[:, :-1]),
        (idx[:, 1:], idx[:, :-1], south[:, 1:]),
    )
    rows = [idx.ravel()] + [src.ravel() for src, _, _ in links]
    cols = [idx.ravel()] + [dst.ravel() for _, dst, _ in links]
    vals = [diag] + [-c.ravel() for _, _, c in links]
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(m * m, m * m))
    return A / h ** 2


def solve_darcy(a, source=1.0, rtol=1e-8):
    res = a.shape[0]
    A = darcy_matrix(a)
    b = np.full(A.shape[0], float(source))
    maxiter = 10 * res * res
    x, info = cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter)
    resid = float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
    if info != 0 or resid > 10 * rtol:
        raise SolverError(f"darcy CG did not converge in {maxiter} iterations, relative residual {resid:.3e}")
    u = np.zeros_like(a, dtype=np.float64)
    u[1:-1, 1:-1] = x.reshape(res - 2, res - 2)
    return u, resid


def darcy_residual(a, u, source=1.0):
    A = darcy_matrix(a)
    b = np.full(A.shape[0], float(source))
    return float(np.linalg.norm(A @ u[1:-1, 1:-1].ravel() - b) / np.linalg.norm(b))


def gen_darcy(spec: GrfSpec, n):
    """Thresholded-GRF permeability (12 / 3) -> pressure with unit source."""
    if n < 1:
        raise ValueError("n must be at least 1")
    out = []
    for seed, rng in _pair_rngs(spec.seed, n):
        g = sample_grf(spec, rng)
        a = np.where(g >= 0, 12.0, 3.0)
        u, resid = solve_darcy(a)
        meta = {"seed": seed, "cg_rtol": 1e-8, "residual": resid, "a_high": 12.0, "a_low": 3.0,
                "tau": spec.tau, "alpha": spec.alpha}
        out.append(FieldPair(a, u, "darcy", meta))
    return out


# --------------------------------------------------------------- advection

def _shift_periodic(f, shift, axis):
    k = int(np.floor(shift))
    t = shift - k
    return (1.0 - t) * np.roll(f, k, axis=axis) + t * np.roll(f, k + 1, axis=axis)


def advect(f_grid, velocity=(1.0, 0.5), horizon=0.5):
    """``f(x - c T)`` on the periodic grid by bilinear interpolation."""
    f = _grid_to_torus(np.asarray(f_grid, dtype=np.float64))
    n = f.shape[0]
    u = f
    for axis, c in enumerate(velocity):
        disp = c * horizon * n
        if disp != 0:
            u = _shift_periodic(u, disp, axis)
    return _torus_to_grid(u)


def gen_advection(spec: GrfSpec, n, velocity=(1.0, 0.5), horizon=0.5):
    if n < 1:
        raise ValueError("n must be at least 1")
    out = []
    for seed, rng in _pair_rngs(spec.seed, n):
        f = sample_grf(spec, rng)
        meta = {"seed": seed, "velocity": list(velocity), "horizon": horizon,
                "tau": spec.tau, "alpha": spec.alpha}
        out.append(FieldPair(f, advect(f, velocity, horizon), "advection", meta))
    return out


# ----------------------------------------------------------------- eikonal

_BIG = 1e10


def _diagonals(res):
    inner = np.arange(1, res - 1)
    ii, jj = np.meshgrid(inner, inner, indexing="ij")
    s = (ii + jj).ravel()
    order = np.argsort(s, kind="stable")
    ii, jj, s = ii.ravel()[order], jj.ravel()[order], s[order]
    cuts = np.flatnonzero(np.diff(s)) + 1
    return list(zip(np.split(ii, cuts), np.split(jj, cuts)))


def _sweep(u, cost, diags):
    """One Gauss-Seidel sweep in the (+, +) direction, diagonal by diagonal."""
    for i, j in diags:
        a = np.minimum(u[i - 1, j], u[i + 1, j])
        b = np.minimum(u[i, j - 1], u[i, j + 1])
        c = cost[i, j]
        diff = np.abs(a - b)
        one_sided = np.minimum(a, b) + c
        two_sided = 0.5 * (a + b + np.sqrt(np.maximum(2.0 * c * c - (a - b) ** 2, 0.0)))
        cand = np.where(diff >= c, one_sided, two_sided)
        u[i, j] = np.minimum(u[i, j], cand)


_FLIPS = ((), (0,), (0, 1), (1,))


def fast_sweep_round(u, cost, diags):
    """Four sweeps in the four diagonal orderings; updates ``u`` in place."""
    for axes in _FLIPS:
        view = np.flip(u, axes) if axes else u
        cview = np.flip(cost, axes) if axes else cost
        _sweep(view, cview, diags)
    return u


def solve_eikonal(speed, tol=1e-8, max_rounds=100):
    """``|grad u| = 1 / speed`` with ``u = 0`` on the boundary."""
    speed = np.asarray(speed, dtype=np.float64)
    res = speed.shape[0]
    h = 1.0 / (res - 1)
    cost = h / speed
    u = np.full_like(speed, _BIG)
    u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0.0
    diags = _diagonals(res)
    for rounds in range(1, max_rounds + 1):
        before = u.copy()
        fast_sweep_round(u, cost, diags)
        change = float(np.max(np.abs(u - before)))
        if change < tol:
            return u, rounds
    raise SolverError(f"fast sweeping did not converge in {max_rounds} rounds (last change {change:.3e})")


def gen_eikonal(spec: GrfSpec, n):
    if n < 1:
        raise ValueError("n must be at least 1")
    out = []
    for seed, rng in _pair_rngs(spec.seed, n):
        s = np.exp(0.5 * sample_grf(spec, rng))
        u, rounds = solve_eikonal(s)
        meta = {"seed": seed, "sweep_tol": 1e-8, "rounds": rounds, "tau": spec.tau, "alpha": spec.alpha}
        out.append(FieldPair(s, u, "eikonal", meta))
    return out


# ----------------------------------------------------- nonlinear diffusion

def diffusivity(u):
    return 0.01 + 0.1 * u * u


def _diffusion_rhs(u, dx):
    d = diffusivity(u)
    out = np.zeros_like(u)
    for axis in (0, 1):
        up = np.roll(u, -1, axis=axis)
        d_face = 0.5 * (d + np.roll(d, -1, axis=axis))
        flux = d_face * (up - u) / dx
        out += (flux - np.roll(flux, 1, axis=axis)) / dx
    return out


def diffuse(f_grid, horizon=0.2, cfl=0.2, dt_scale=1.0):
    """Integrate ``u_t = div(D(u) grad u)`` with Heun's method on the torus."""
    u = _grid_to_torus(np.asarray(f_grid, dtype=np.float64)).copy()
    n = u.shape[0]
    dx = 1.0 / n
    dt_max = cfl * dx * dx / float(np.max(diffusivity(u))) * dt_scale
    steps = int(np.ceil(horizon / dt_max))
    dt = horizon / steps
    if not dt > 1e-14:
        raise SolverError(f"diffusion step size underflow (dt={dt})")
    for _ in range(steps):
        k1 = _diffusion_rhs(u, dx)
        k2 = _diffusion_rhs(u + dt * k1, dx)
        u = u + 0.5 * dt * (k1 + k2)
    if not np.all(np.isfinite(u)):
        raise SolverError("diffusion state became non-finite")
    return _torus_to_grid(u), steps


def gen_nonlinear_diffusion(spec: GrfSpec, n, horizon=0.2):
    if n < 1:
        raise ValueError("n must be at least 1")
    out = []
    for seed, rng in _pair_rngs(spec.seed, n):
        g = sample_grf(spec, rng)
        f = (g / np.max(np.abs(g))) ** 2
        u, steps = diffuse(f, horizon)
        meta = {"seed": seed, "horizon": horizon, "steps": steps, "tau": spec.tau, "alpha": spec.alpha}
        out.append(FieldPair(f, u, "nonlinear_diffusion", meta))
    return out


GENERATORS = {
    "darcy": (gen_darcy, 2.0),
    "advection": (gen_advection, 3.0),
    "eikonal": (gen_eikonal, 2.0),
    "nonlinear_diffusion": (gen_nonlinear_diffusion, 2.5),
}


def generate(pde_tag, n, grid_res=128, seed=0, tau=3.0, alpha=None):
    """Build a :class:`Dataset` for one benchmark with its default GRF smoothness."""
    if pde_tag not in GENERATORS:
        raise ValueError(f"unknown pde {pde_tag!r}; expected one of {', '.join(PDE_TAGS)}")
    gen, default_alpha = GENERATORS[pde_tag]
    spec = GrfSpec(grid_res, tau, default_alpha if alpha is None else alpha, seed)
    pairs = gen(spec, n)
    return Dataset.from_pairs(pairs, {"seed": seed, "grf": {"tau": spec.tau, "alpha": spec.alpha}})


# ---------------------------------------------------------------- sampling

def subsample(pair: FieldPair, density, seed):
    """Paired ``(points, f, u)`` at ``density`` random grid nodes."""
    res = pair.f_grid.shape[0]
    pts = sample_points(res, density, seed)
    return pts, pair.f_grid.reshape(-1)[pts.indices], pair.u_grid.reshape(-1)[pts.indices]


# --------------------------------------------------------------- container

def write_container(path, metadata, arrays):
    """Write named float32 arrays after a JSON header."""
    meta = dict(metadata)
    meta["arrays"] = [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()]
    header = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def read_container(path):
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path} does not start with {MAGIC!r}")
    if len(raw) < 12:
        raise TruncatedPayloadError("header cut short")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise VersionMismatchError(f"file version {version}, reader version {VERSION}")
    if len(raw) < 12 + hlen:
        raise TruncatedPayloadError("metadata block cut short")
    meta = json.loads(raw[12:12 + hlen].decode("utf-8"))
    payload = memoryview(raw)[12 + hlen:]
    arrays, pos = {}, 0
    for spec in meta["arrays"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        nbytes = 4 * count
        if pos + nbytes > len(payload):
            raise TruncatedPayloadError(f"array {spec['name']!r} needs {nbytes} bytes, "
                                        f"{len(payload) - pos} remain")
        arrays[spec["name"]] = np.frombuffer(payload[pos:pos + nbytes], dtype="<f4").reshape(spec["shape"]).copy()
        pos += nbytes
    if pos != len(payload):
        raise TruncatedPayloadError(f"{len(payload) - pos} trailing bytes after declared arrays")
    return meta, arrays


def save(path, dataset: Dataset):
    meta = dict(dataset.metadata)
    meta.update(pde_tag=dataset.pde_tag, grid_res=dataset.grid_res, count=len(dataset))
    write_container(path, meta, {"f": dataset.f, "u": dataset.u})


def load(path) -> Dataset:
    meta, arrays = read_container(path)
    count, res = meta.get("count"), meta.get("grid_res")
    for name in ("f", "u"):
        if name not in arrays:
            raise TruncatedPayloadError(f"missing array {name!r}")
        if arrays[name].shape != (count, res, res):
            raise TruncatedPayloadError(f"array {name!r} has shape {arrays[name].shape}, "
                                        f"metadata declares count={count}, grid_res={res}")
    meta.pop("arrays")
    return Dataset(meta["pde_tag"], res, arrays["f"], arrays["u"], meta)
