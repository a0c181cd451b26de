import numpy as np

from gola.geometry import attach_edge_attributes, build_radius_graph, sample_points


def random_graph(n=30, radius=0.3, c_in=1, seed=0, grid_res=32):
    """A random radius graph with edge attributes and its point data."""
    pts = sample_points(grid_res, n, seed)
    f = np.random.default_rng(seed + 100).normal(size=(n, c_in))
    graph = attach_edge_attributes(build_radius_graph(pts, radius), pts, f)
    return pts.coords, f, graph


def permute_graph(coords, f, perm, radius, c_in=1):
    """Relabel nodes so that new node k is old node perm[k]."""
    from gola.geometry import PointSet

    pts = PointSet(coords[perm], 0)
    g = attach_edge_attributes(build_radius_graph(pts, radius), pts, f[perm])
    return coords[perm], f[perm], g


def fd_check(loss_fn, params, tol=1e-4):
    from gola import autodiff as ad

    err = ad.grad_check(loss_fn, params)
    assert err < tol, err

