import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gola import autodiff as ad
from gola import spectral
from gola.autodiff import ParamStore, Tensor


def grid64():
    k = np.arange(64) / 64
    x1, x2 = np.meshgrid(k, k, indexing="ij")
    return np.stack([x1.ravel(), x2.ravel()], axis=1)


def test_zero_frequency_column_is_one():
    x = np.random.default_rng(0).uniform(size=(7, 2))
    pr, pi = spectral.basis(x, np.zeros((1, 2)))
    np.testing.assert_array_equal(pr.data, 1.0)
    np.testing.assert_array_equal(pi.data, 0.0)


def test_half_period_gives_minus_one():
    pr, pi = spectral.basis(np.array([[0.5, 0.25]]), np.array([[1.0, 0.0]]))
    assert pr.data[0, 0, 0] == pytest.approx(-1.0, abs=1e-15)
    assert pi.data[0, 0, 0] == pytest.approx(0.0, abs=1e-15)


def test_basis_matches_scalar_loop():
    rng = np.random.default_rng(1)
    x, om = rng.uniform(size=(2, 9, 2)), rng.normal(size=(5, 2))
    pr, pi = spectral.basis(x, om)
    for b in range(2):
        for i in range(9):
            for m in range(5):
                th = 2 * np.pi * (x[b, i, 0] * om[m, 0] + x[b, i, 1] * om[m, 1])
                assert abs(pr.data[b, i, m] - np.cos(th)) < 1e-12
                assert abs(pi.data[b, i, m] - np.sin(th)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_basis_unit_modulus(seed):
    rng = np.random.default_rng(seed)
    pr, pi = spectral.basis(rng.uniform(-3, 3, size=(3, 11, 2)), rng.normal(0, 5, size=(6, 2)))
    np.testing.assert_allclose(pr.data ** 2 + pi.data ** 2, 1.0, atol=1e-9)


def test_constant_field_coefficient():
    x = np.random.default_rng(2).uniform(size=(13, 2))
    phi = spectral.basis(x, np.zeros((1, 2)))
    ur, ui = spectral.forward_coefficients(np.full((1, 1, 13), 3.0), phi)
    assert ur.data[0, 0, 0] == pytest.approx(3.0, abs=1e-14)
    assert ui.data[0, 0, 0] == pytest.approx(0.0, abs=1e-14)


def test_grid_orthogonality():
    x = grid64()
    f = np.cos(2 * np.pi * x[:, 0])[None, None, :]
    phi = spectral.basis(x, np.array([[1.0, 0.0], [2.0, 0.0]]))
    ur, ui = spectral.forward_coefficients(f, phi)
    assert abs(ur.data[0, 0, 0] - 0.5) < 1e-9 and abs(ui.data[0, 0, 0]) < 1e-9
    assert abs(ur.data[0, 0, 1]) < 1e-9 and abs(ui.data[0, 0, 1]) < 1e-9
    # the same sum written out directly
    direct = np.mean(f[0, 0] * np.exp(-2j * np.pi * x[:, 0]))
    assert abs(direct - 0.5) < 1e-9


def test_forward_coefficients_shape_mismatch():
    phi = spectral.basis(np.zeros((4, 2)), np.zeros((3, 2)))
    with pytest.raises(ad.ShapeError):
        spectral.forward_coefficients(np.zeros((1, 1, 5)), phi)


def test_identity_and_rotation_filters():
    u = (Tensor(np.array([[[1.0, 2.0]]])), Tensor(np.array([[[0.5, -1.0]]])))
    vr, vi = spectral.filter(u, (np.ones((1, 1, 2)), np.zeros((1, 1, 2))))
    np.testing.assert_array_equal(vr.data, u[0].data)
    np.testing.assert_array_equal(vi.data, u[1].data)
    one = (Tensor(np.ones((1, 1, 1))), Tensor(np.zeros((1, 1, 1))))
    vr, vi = spectral.filter(one, (np.zeros((1, 1, 1)), np.ones((1, 1, 1))))
    assert (vr.data.item(), vi.data.item()) == (0.0, 1.0)


def test_filter_matches_triple_loop():
    rng = np.random.default_rng(3)
    b, c, o, m = 2, 3, 4, 5
    u = rng.normal(size=(b, c, m)) + 1j * rng.normal(size=(b, c, m))
    w = rng.normal(size=(c, o, m)) + 1j * rng.normal(size=(c, o, m))
    vr, vi = spectral.filter((Tensor(u.real), Tensor(u.imag)), (w.real, w.imag))
    ref = np.zeros((b, o, m), complex)
    for bb in range(b):
        for oo in range(o):
            for mm in range(m):
                for cc in range(c):
                    ref[bb, oo, mm] += u[bb, cc, mm] * w[cc, oo, mm]
    np.testing.assert_allclose(vr.data + 1j * vi.data, ref, atol=1e-12)


def test_filter_shape_mismatch():
    u = (Tensor(np.zeros((1, 2, 3))), Tensor(np.zeros((1, 2, 3))))
    with pytest.raises(ad.ShapeError):
        spectral.filter(u, (np.zeros((3, 1, 3)), np.zeros((3, 1, 3))))


def test_inverse_trivial_cases():
    x = np.random.default_rng(4).uniform(size=(6, 2))
    phi = spectral.basis(x, np.array([[0.0, 0.0], [1.0, 2.0]]))
    h = spectral.inverse((Tensor(np.array([[[1.0, 0.0]]])), Tensor(np.zeros((1, 1, 2)))), phi)
    np.testing.assert_allclose(h.data, 1.0, atol=1e-15)
    h = spectral.inverse((Tensor(np.zeros((1, 1, 2))), Tensor(np.zeros((1, 1, 2)))), phi)
    np.testing.assert_array_equal(h.data, 0.0)


def test_inverse_matches_loop():
    rng = np.random.default_rng(5)
    x, om = rng.uniform(size=(1, 8, 2)), rng.normal(size=(4, 2))
    v = rng.normal(size=(1, 3, 4)) + 1j * rng.normal(size=(1, 3, 4))
    h = spectral.inverse((Tensor(v.real), Tensor(v.imag)), spectral.basis(x, om)).data
    for o in range(3):
        for i in range(8):
            ref = sum(v[0, o, m] * np.exp(2j * np.pi * om[m] @ x[0, i]) for m in range(4)).real
            assert abs(h[0, o, i] - ref) < 1e-12


def test_band_limited_reconstruction():
    x = grid64()
    modes = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    f = 0.7 + 1.3 * np.cos(2 * np.pi * x[:, 0]) - 0.4 * np.sin(2 * np.pi * x[:, 1] + 0.3)
    w = (np.ones((1, 1, 5)), np.zeros((1, 1, 5)))
    h = spectral.encode(f[None, None, :], x, modes, w).data[0, 0]
    assert np.linalg.norm(h - f) / np.linalg.norm(f) < 1e-6


def test_single_point_hand_evaluation():
    rng = np.random.default_rng(6)
    x, om = rng.uniform(size=(1, 2)), rng.normal(size=(5, 2))
    wr, wi = rng.normal(size=(1, 1, 5)), rng.normal(size=(1, 1, 5))
    f = 2.5
    h = spectral.encode(np.array([[[f]]]), x, om, (wr, wi)).data.item()
    # at N = 1, u_hat = f conj(phi) and phi conj(phi) = 1, so h = f Re(sum W)
    assert h == pytest.approx(f * wr.sum(), abs=1e-12)


def test_zero_input_gives_zero():
    rng = np.random.default_rng(7)
    w = spectral.init_weights(2, 3, 8, rng)
    h = spectral.encode(np.zeros((1, 2, 10)), rng.uniform(size=(10, 2)), rng.normal(size=(8, 2)), w)
    np.testing.assert_array_equal(h.data, 0.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    x, om = rng.uniform(size=(12, 2)), rng.normal(size=(6, 2))
    w = spectral.init_weights(2, 3, 6, rng)
    f1, f2 = rng.normal(size=(1, 2, 12)), rng.normal(size=(1, 2, 12))
    lhs = spectral.encode(a * f1 + b * f2, x, om, w).data
    rhs = a * spectral.encode(f1, x, om, w).data + b * spectral.encode(f2, x, om, w).data
    assert np.max(np.abs(lhs - rhs)) <= 1e-6 * max(1.0, np.max(np.abs(rhs)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    x, om = rng.uniform(size=(15, 2)), rng.normal(size=(6, 2))
    w = spectral.init_weights(1, 2, 6, rng)
    f = rng.normal(size=(1, 1, 15))
    perm = rng.permutation(15)
    h = spectral.encode(f, x, om, w).data
    hp = spectral.encode(f[:, :, perm], x[perm], om, w).data
    np.testing.assert_allclose(hp, h[:, :, perm], atol=1e-12)


def test_lattice_frequencies_are_smallest_and_paired():
    om = spectral.lattice_frequencies(9)
    norms = np.sum(om ** 2, axis=1)
    assert list(om[0]) == [0, 0]
    assert np.all(np.diff(norms) >= 0)
    assert len({tuple(r) for r in om}) == 9
    # every nonzero frequency in the first 9 has its negation present
    s = {tuple(r) for r in om}
    assert all((-a, -b) in s for a, b in s)


def test_init_frequencies_jitter():
    om = spectral.init_frequencies(16, np.random.default_rng(0), jitter=0.01)
    assert np.max(np.abs(om - spectral.lattice_frequencies(16))) < 0.06
    np.testing.assert_array_equal(spectral.init_frequencies(16, None, jitter=0), spectral.lattice_frequencies(16))


def test_encode_gradients():
    rng = np.random.default_rng(8)
    x = rng.uniform(size=(10, 2))
    params = ParamStore({"om": rng.normal(size=(4, 2)), "wr": rng.normal(size=(2, 3, 4)),
                         "wi": rng.normal(size=(2, 3, 4)), "f": rng.normal(size=(1, 2, 10))})
    target = rng.normal(size=(1, 3, 10))

    def loss(p):
        h = spectral.encode(p["f"], x, p["om"], (p["wr"], p["wi"]))
        return ad.sum(ad.square(h - target))

    assert ad.grad_check(loss, params) < 1e-4


def test_unit_modulus_after_frequency_update():
    rng = np.random.default_rng(9)
    x = rng.uniform(size=(10, 2))
    params = ParamStore({"om": rng.normal(size=(4, 2))})
    f = rng.normal(size=(1, 1, 10))
    w = spectral.init_weights(1, 1, 4, rng)
    for _ in range(3):
        _, g = ad.forward_backward(lambda p: ad.sum(ad.square(spectral.encode(f, x, p["om"], w))), params)
        params["om"].data -= 0.1 * g["om"]
        pr, pi = spectral.basis(x, params["om"].data)
        np.testing.assert_allclose(pr.data ** 2 + pi.data ** 2, 1.0, atol=1e-9)
