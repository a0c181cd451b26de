"""Point sampling on the unit-square grid and radius-graph construction."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class PointSet:
    """Distinct grid nodes in [0, 1]^2.

    ``indices`` are flat grid indices ``i1 * grid_res + i2`` and ``coords``
    the matching positions ``(i1, i2) / (grid_res - 1)``.
    """

    coords: np.ndarray
    source_grid_res: int
    seed: int | None = None
    indices: np.ndarray | None = None

    def __len__(self):
        return len(self.coords)

    def permuted(self, perm):
        perm = np.asarray(perm)
        idx = None if self.indices is None else self.indices[perm]
        return PointSet(self.coords[perm], self.source_grid_res, self.seed, idx)


@dataclass
class SpatialGraph:
    """Directed radius graph stored receiver-major.

    ``edges[k] = (i, j)`` means node ``i`` receives from neighbour ``j``.
    Edges are sorted by ``(i, j)`` so that the incoming edges of node ``i``
    occupy ``offsets[i]:offsets[i + 1]``.
    """

    edges: np.ndarray
    num_nodes: int
    radius: float
    offsets: np.ndarray
    edge_attr: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def receivers(self):
        return self.edges[:, 0]

    @property
    def senders(self):
        return self.edges[:, 1]

    @cached_property
    def degree(self):
        return np.diff(self.offsets)

    @cached_property
    def padded(self):
        """``(index, mask)`` laying out each node's incoming edges as one row.

        ``index`` is ``num_nodes x max_degree``; padding slots point at edge 0
        and are ``False`` in ``mask``.
        """
        deg = self.degree
        width = int(deg.max()) if len(deg) and deg.max() > 0 else 1
        slot = np.arange(width)
        mask = slot[None, :] < deg[:, None]
        index = np.where(mask, self.offsets[:-1, None] + slot[None, :], 0)
        return index, mask

    def with_attributes(self, edge_attr):
        return SpatialGraph(self.edges, self.num_nodes, self.radius, self.offsets, edge_attr)


def grid_coords(grid_res, flat_index):
    flat_index = np.asarray(flat_index)
    i1, i2 = np.divmod(flat_index, grid_res)
    return np.stack([i1, i2], axis=-1) / (grid_res - 1)


def sample_points(grid_res, density, seed):
    """Choose ``density`` distinct nodes of a ``grid_res x grid_res`` grid.

    The subset is drawn uniformly without replacement from a PCG64 stream
    seeded by ``seed`` and returned in canonical (flat index) order.
    """
    total = grid_res * grid_res
    if not 1 <= density <= total:
        raise ValueError(f"density {density} outside [1, {total}] for a {grid_res}x{grid_res} grid")
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = np.sort(rng.choice(total, size=density, replace=False))
    return PointSet(grid_coords(grid_res, idx), grid_res, seed, idx)


def _from_pairs(i, j, n, radius):
    order = np.lexsort((j, i))
    edges = np.stack([i[order], j[order]], axis=1).astype(np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(edges[:, 0], minlength=n), out=offsets[1:])
    return SpatialGraph(edges.reshape(-1, 2), n, float(radius), offsets)


def build_radius_graph(points, radius):
    """Symmetric edge set ``{(i, j): i != j, |x_i - x_j| <= radius}``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(points.coords if isinstance(points, PointSet) else points, dtype=np.float64)
    n = len(x)
    tree = cKDTree(x)
    pairs = tree.query_pairs(radius * (1 + 1e-9), output_type="ndarray")
    if len(pairs):
        d = np.sqrt(((x[pairs[:, 0]] - x[pairs[:, 1]]) ** 2).sum(axis=1))
        pairs = pairs[d <= radius]
    a, b = pairs[:, 0], pairs[:, 1]
    return _from_pairs(np.concatenate([a, b]), np.concatenate([b, a]), n, radius)


def brute_force_edges(coords, radius):
    """All-pairs reference for :func:`build_radius_graph`."""
    x = np.asarray(coords, dtype=np.float64)
    out = set()
    for i in range(len(x)):
        for j in range(len(x)):
            if i != j and np.sqrt(((x[i] - x[j]) ** 2).sum()) <= radius:
                out.add((i, j))
    return out


def attach_edge_attributes(graph, points, f_values):
    """Edge rows ``concat(x_i, x_j, f(x_i), f(x_j))``."""
    x = np.asarray(points.coords if isinstance(points, PointSet) else points)
    f = np.asarray(f_values)
    if f.ndim == 1:
        f = f[:, None]
    if len(f) != len(x) or len(x) != graph.num_nodes:
        raise ValueError(f"attach_edge_attributes: {len(x)} points, {len(f)} value rows, "
                         f"{graph.num_nodes} graph nodes")
    i, j = graph.receivers, graph.senders
    attr = np.concatenate([x[i], x[j], f[i], f[j]], axis=1)
    return graph.with_attributes(attr)


def default_radius(density, target_degree=10.0):
    """Radius with expected degree ``target_degree`` for uniform points on the unit square."""
    if density < 2:
        raise ValueError("density must be at least 2")
    r = np.sqrt(target_degree / (np.pi * density))
    return float(np.clip(r, 0.02, 0.5))
