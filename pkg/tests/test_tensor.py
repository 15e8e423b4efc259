import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hypermsg import tensor as T
from hypermsg.errors import MissingGradient, NonFiniteValue, NotScalarLoss, ZeroPower


def grad_of(f, *tensors):
    for t in tensors:
        t.requires_grad = True
        t.grad = None
    with T.Tape() as tape:
        out = f()
    tape.backward(out, tensors)
    return [t.grad for t in tensors]


def test_primitive_examples():
    assert np.allclose(T.rowwise_l2_normalize(T.Tensor([[3.0, 4.0]])).data, [[0.6, 0.8]])
    assert np.array_equal(T.relu(T.Tensor([[-1.0, 2.0]])).data, [[0.0, 2.0]])
    assert T.signed_pow(T.Tensor([[-2.0]]), 2.0).data[0, 0] == -4.0
    assert np.array_equal(T.mean_rows(T.Tensor([[0.0, 2.0], [2.0, 0.0]])).data, [[1.0, 1.0]])


def test_one_dim_input_is_row():
    assert T.Tensor([1.0, 2.0]).shape == (1, 2)


def test_signed_pow_zero_power():
    with pytest.raises(ZeroPower):
        T.signed_pow(T.Tensor([[1.0]]), 0.0)


def test_matmul_grad_is_outer_structure():
    x = T.Tensor([[1.0, 2.0, 3.0]])
    W = T.Tensor(np.ones((3, 2)))
    (g,) = grad_of(lambda: T.sum_all(T.matmul(x, W)), W)
    assert np.array_equal(g, np.repeat(x.data.T, 2, axis=1))


def test_unused_param_gets_zero_grad():
    a = T.Tensor([[1.0, 2.0]])
    b = T.Tensor([[5.0]])
    ga, gb = grad_of(lambda: T.sum_all(a), a, b)
    assert np.array_equal(gb, [[0.0]])
    assert np.array_equal(ga, [[1.0, 1.0]])


def test_backward_needs_scalar():
    a = T.Tensor([[1.0, 2.0]], requires_grad=True)
    with T.Tape() as tape:
        out = T.scale(a, 2.0)
    with pytest.raises(NotScalarLoss):
        tape.backward(out, [a])


def test_no_tape_no_recording():
    a = T.Tensor([[1.0]], requires_grad=True)
    out = T.scale(a, 3.0)  # outside any tape
    assert out.data[0, 0] == 3.0


def test_debug_nan_check():
    T.set_debug(True)
    try:
        with pytest.raises(NonFiniteValue), np.errstate(invalid="ignore"):
            T.log(T.Tensor([[-1.0]]))
    finally:
        T.set_debug(False)


def test_quadratic_finite_diff():
    theta = T.Tensor([[3.0]])
    rep = T.finite_diff_check(lambda: T.sum_all(T.mul(theta, theta)), {"theta": theta}, tolerance=1e-6)
    assert rep.passed
    assert abs(rep.worst[2] - 6.0) < 1e-6
    assert abs(rep.worst[3] - 6.0) < 1e-6


def test_finite_diff_negative_control():
    theta = T.Tensor([[1.5, -0.5]])

    def wrong_square(a):
        # forward a^2 with a backward rule that forgets the factor 2
        return T._make(a.data**2, (a,), lambda g: T._accum(a, g * a.data))

    rep = T.finite_diff_check(lambda: T.sum_all(wrong_square(theta)), {"theta": theta})
    assert not rep.passed


COMPOSITES = {
    "tanh_softplus": lambda a, b: T.sum_all(T.mul(T.tanh(T.matmul(a, b)), T.softplus(T.matmul(a, b)))),
    "normalize": lambda a, b: T.sum_all(T.mul(T.rowwise_l2_normalize(T.matmul(a, b)), T.matmul(a, b))),
    "signed_pow": lambda a, b: T.sum_all(T.signed_pow(T.matmul(a, b), 3.0)),
    "softmax": lambda a, b: T.softmax_cross_entropy(T.matmul(a, b), np.array([0, 2, 1])),
    "sigmoid": lambda a, b: T.sigmoid_cross_entropy(T.matmul(a, b), np.eye(3)),
    "segment": lambda a, b: T.sum_all(T.exp(T.segment_sum(T.gather_rows(T.matmul(a, b), [0, 2, 2, 1]),
                                                          np.array([0, 0, 1, 1]), 2))),
    "log_sub": lambda a, b: T.sum_all(T.mul(T.log(T.exp(T.sub(T.matmul(a, b), T.mean_rows(T.matmul(a, b)))), 0.0),
                                           T.Tensor(np.random.default_rng(7).normal(size=(3, 3))))),
}


@pytest.mark.parametrize("name", sorted(COMPOSITES))
def test_composite_gradients(name):
    rng = np.random.default_rng(1)
    a = T.Tensor(rng.normal(size=(3, 4)))
    b = T.Tensor(rng.normal(size=(4, 3)))
    rep = T.finite_diff_check(lambda: COMPOSITES[name](a, b), {"a": a, "b": b})
    assert rep.passed, rep.worst


def test_dropout_eval_identity_and_train_scaling():
    x = T.Tensor(np.ones((200, 50)))
    assert np.array_equal(T.dropout(x, 0.5, None, False).data, x.data)
    y = T.dropout(x, 0.5, np.random.default_rng(0), True).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05


def test_segment_sum_order_independent():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(6, 3)) * 10.0 ** rng.integers(-8, 8, size=(6, 1))
    seg = np.zeros(6, dtype=np.int64)
    base = T.segment_sum(T.Tensor(vals), seg, 1).data
    for _ in range(20):
        p = rng.permutation(6)
        assert np.array_equal(T.segment_sum(T.Tensor(vals[p]), seg, 1).data, base)


def test_adam_zero_grad_unchanged():
    p = T.Tensor([[1.0, -2.0]], requires_grad=True)
    opt = T.Adam({"p": p}, weight_decay=0.0)
    p.grad = np.zeros_like(p.data)
    opt.step()
    assert np.array_equal(p.data, [[1.0, -2.0]])


def test_adam_defaults_and_first_step():
    p = T.Tensor([[0.0]], requires_grad=True)
    opt = T.Adam({"p": p})
    assert opt.state.lr == 0.01
    assert opt.state.weight_decay == 0.0005
    p.grad = np.ones_like(p.data)
    opt.step()
    assert abs(p.data[0, 0] + 0.01) < 1e-9


def test_adam_missing_gradient():
    p = T.Tensor([[0.0]], requires_grad=True)
    with pytest.raises(MissingGradient):
        T.Adam({"p": p}).step()


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 2), elements=st.floats(-5, 5)), st.sampled_from([0.5, 1.0, 2.0, 3.0]))
def test_signed_pow_inverse(x, p):
    y = T.signed_pow(T.signed_pow(T.Tensor(x), p), 1.0 / p).data
    assert np.allclose(y, x, atol=1e-9)
