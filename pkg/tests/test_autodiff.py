import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gola import autodiff as ad
from gola.autodiff import ParamStore, ShapeError, Tensor


def numeric_grad(fn, x, step=1e-5):
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        up = fn(x)
        flat[k] = orig - step
        down = fn(x)
        flat[k] = orig
        gf[k] = (up - down) / (2 * step)
    return g


def check_unary(op, x, tol=1e-6, weights=None):
    rng = np.random.default_rng(1)
    t = Tensor(x.copy(), requires_grad=True)
    out = op(t)
    w = rng.normal(size=out.shape) if weights is None else weights
    ad.sum(out * w).backward()
    num = numeric_grad(lambda a: float((op(Tensor(a)).data * w).sum()), x.copy())
    err = np.max(np.abs(t.grad - num) / np.maximum(1.0, np.abs(num)))
    assert err < tol, err


def test_quadratic_gradient():
    params = ParamStore({"p": np.array([1.0, 2.0, 3.0])})
    loss, grads = ad.forward_backward(lambda p: ad.sum(p["p"] * p["p"]), params)
    assert loss == 14.0
    np.testing.assert_array_equal(grads["p"], [2.0, 4.0, 6.0])


def test_softmax_sum_has_zero_gradient():
    params = ParamStore({"z": np.random.default_rng(0).normal(size=(3, 5))})
    _, grads = ad.forward_backward(lambda p: ad.sum(ad.softmax(p["z"], axis=1)), params)
    np.testing.assert_allclose(grads["z"], 0.0, atol=1e-15)


def test_untouched_parameters_get_zero_gradient():
    params = ParamStore({"a": np.ones(3), "b": np.ones((2, 2))})
    _, grads = ad.forward_backward(lambda p: ad.sum(p["a"]), params)
    np.testing.assert_array_equal(grads["b"], np.zeros((2, 2)))


def test_constant_loss_grad_check_is_zero():
    params = ParamStore({"a": np.ones(4)})
    assert ad.grad_check(lambda p: Tensor(np.array(3.0)), params) == 0.0


def test_non_finite_loss_rejected():
    params = ParamStore({"a": np.zeros(2)})
    with np.errstate(divide="ignore", invalid="ignore"), pytest.raises(FloatingPointError):
        ad.grad_check(lambda p: ad.sum(p["a"]) / 0.0, params)


def test_composite_matches_finite_differences():
    rng = np.random.default_rng(5)
    a0, b0 = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    params = ParamStore({"a": a0, "b": b0})

    def loss(p):
        a, b = p["a"], p["b"]
        z = ad.exp(a * 0.3) * b - a / (ad.square(b) + 1.0)
        z = ad.gelu(z @ ad.transpose(a))
        return ad.sum(ad.sqrt(ad.square(z) + 1.0))

    assert ad.grad_check(loss, params, step=1e-5) < 1e-6


@pytest.mark.parametrize("op", [
    ad.exp, ad.cos, ad.sin, ad.gelu, ad.square,
    lambda t: ad.sqrt(ad.square(t) + 0.5),
    lambda t: ad.softmax(t, axis=-1),
    lambda t: ad.mean(t, axis=0),
    lambda t: ad.sum(t, axis=1, keepdims=True),
    lambda t: ad.transpose(t),
    lambda t: ad.reshape(t, (-1,)),
    lambda t: t[1:, ::2],
    lambda t: ad.concat([t, t * 2.0], axis=0),
    lambda t: 1.0 / (ad.square(t) + 1.0),
    lambda t: 3.0 - t,
])
def test_primitive_gradients(op):
    x = np.random.default_rng(2).normal(size=(3, 4))
    check_unary(op, x)


def test_relu_gradient_away_from_kink():
    x = np.array([[-1.0, 0.5], [2.0, -0.3]])
    check_unary(ad.relu, x)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(0, 10_000))
def test_broadcast_binary_ops_match_finite_differences(shape, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=shape)
    other = rng.normal(size=shape[-1:]) + 3.0
    for op in (ad.add, ad.sub, ad.mul, ad.div):
        check_unary(lambda t: op(t, Tensor(other)), x)
        check_unary(lambda t: op(Tensor(x), t), other.copy())


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000))
def test_batched_matmul_gradients(b, n, k, seed):
    rng = np.random.default_rng(seed)
    a0, w0 = rng.normal(size=(b, n, k)), rng.normal(size=(k, 3))
    check_unary(lambda t: t @ Tensor(w0), a0)
    check_unary(lambda t: Tensor(a0) @ t, w0)
    v0 = rng.normal(size=(b, k, 1))
    m0 = rng.normal(size=(b, n, k))
    check_unary(lambda t: t @ Tensor(v0), m0)
    check_unary(lambda t: Tensor(m0) @ t, v0)


def test_max_routes_gradient_to_lowest_argmax():
    t = Tensor(np.array([[1.0, 3.0, 3.0], [2.0, 2.0, 0.0]]), requires_grad=True)
    ad.sum(ad.max(t, axis=1)).backward()
    np.testing.assert_array_equal(t.grad, [[0, 1, 0], [1, 0, 0]])
    t.grad = None
    ad.sum(ad.min(t, axis=1)).backward()
    np.testing.assert_array_equal(t.grad, [[1, 0, 0], [0, 0, 1]])


def test_masked_max_and_softmax():
    x = np.array([[5.0, 1.0, 2.0], [0.0, 0.0, 0.0]])
    mask = np.array([[False, True, True], [False, False, False]])
    t = Tensor(x, requires_grad=True)
    out = ad.max(t, axis=1, mask=mask)
    np.testing.assert_array_equal(out.data, [2.0, 0.0])
    ad.sum(out).backward()
    np.testing.assert_array_equal(t.grad, [[0, 0, 1], [0, 0, 0]])
    sm = ad.softmax(Tensor(x), axis=1, mask=mask).data
    np.testing.assert_allclose(sm[0], [0.0, np.exp(1) / (np.exp(1) + np.exp(2)), np.exp(2) / (np.exp(1) + np.exp(2))])
    np.testing.assert_array_equal(sm[1], 0.0)


def test_extreme_gradients_away_from_ties():
    x = np.random.default_rng(3).normal(size=(4, 5))
    check_unary(lambda t: ad.max(t, axis=1), x)
    check_unary(lambda t: ad.min(t, axis=0), x)


def test_gather_scatter():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(5, 3))
    idx = np.array([0, 2, 2, 4, 1, 0])
    check_unary(lambda t: ad.gather(t, idx), x)
    check_unary(lambda t: ad.gather(t, idx.reshape(2, 3)), x)
    check_unary(lambda t: ad.scatter_add(t, idx, 7), rng.normal(size=(6, 3)))


def test_scatter_then_gather_disjoint_is_identity():
    x = np.random.default_rng(6).normal(size=(4, 2))
    idx = np.array([3, 0, 5, 1])
    back = ad.gather(ad.scatter_add(Tensor(x), idx, 6), idx).data
    np.testing.assert_array_equal(back, x)


def test_complex_mul():
    ar, ai, br, bi = (Tensor(np.array([v])) for v in (1.0, 2.0, 3.0, -1.0))
    cr, ci = ad.complex_mul(ar, ai, br, bi)
    z = (1 + 2j) * (3 - 1j)
    assert cr.data[0] == z.real and ci.data[0] == z.imag


@pytest.mark.parametrize("op,args", [
    (ad.add, (np.ones((2, 3)), np.ones((4, 3)))),
    (ad.matmul, (np.ones((2, 3)), np.ones((2, 3)))),
    (ad.concat, ([np.ones((2, 3)), np.ones((3, 2))],)),
])
def test_shape_errors_name_primitive_and_shapes(op, args):
    with pytest.raises(ShapeError) as info:
        op(*args)
    msg = str(info.value)
    assert op.__name__ in msg and "(2, 3)" in msg


def test_param_store_sorted_and_unique():
    store = ParamStore({"b": np.zeros(2), "a": np.zeros((3, 4))})
    assert store.names() == ["a", "b"]
    assert store.count() == 14
    with pytest.raises(KeyError):
        store.add("a", np.zeros(1))


def test_float32_is_preserved():
    t = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
    out = ad.gelu(t * 2.0 + 1.0) @ t
    assert out.dtype == np.float32
    ad.sum(out).backward()
    assert t.grad.dtype == np.float32
