"""Tape autodiff: primitive forward values, gradient fidelity, Adam, errors.

Expected values in the frozen-value tests were computed by hand (matmul,
sigmoid, mse) or from the bias-corrected Adam update formula before the
implementation existed.
"""

from __future__ import annotations

import numpy as np
import pytest

from lnn import autodiff as ad


# ---------------------------------------------------------------------------
# frozen forward values

def test_matmul_hand_value():
    a = ad.Tensor([[1.0, 2.0], [3.0, 4.0]])
    b = ad.Tensor([[5.0], [6.0]])
    c = ad.matmul(a, b)
    assert np.array_equal(c.data, [[17.0], [39.0]])


def test_sigmoid_hand_value():
    y = ad.sigmoid(ad.Tensor([1.0]))
    assert abs(y.data[0] - 0.7310585786300049) < 1e-15


def test_sigmoid_extreme_inputs_stay_finite():
    y = ad.sigmoid(ad.Tensor([-1000.0, 1000.0]))
    assert y.data[0] == 0.0 and y.data[1] == 1.0


def test_mse_hand_value():
    loss = ad.mse_loss(ad.Tensor([1.0, 2.0]), ad.Tensor([0.0, 0.0]))
    assert abs(float(loss.data) - 2.5) < 1e-15


def test_transpose_round_trip():
    a = ad.Tensor([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert np.array_equal(ad.transpose(ad.transpose(a)).data, a.data)


# ---------------------------------------------------------------------------
# gradient fidelity against central differences

def test_grad_check_linear_is_exact():
    # FD of a linear map has no truncation error: tolerance 1e-10
    w = np.array([[0.3, -0.7], [1.1, 0.2]])

    def f(tape, ts):
        x, = ts
        return ad.tsum(ad.matmul(ad.Tensor(w), x))

    err = ad.grad_check(f, [np.array([[0.5], [-1.2]])], step=1e-5)
    assert err < 1e-10


def test_grad_check_each_primitive():
    rng = np.random.default_rng(7)
    x = rng.uniform(-2.0, 2.0, size=(3, 4))
    xpos = rng.uniform(0.5, 2.0, size=(3, 4))
    y = rng.uniform(-2.0, 2.0, size=(3, 4))
    m = rng.uniform(-2.0, 2.0, size=(4, 3))
    s = np.array([1.3])

    cases = {
        "matmul": (lambda tp, ts: ad.tsum(ad.square(ad.matmul(ts[0], ts[1]))), [x, m]),
        "transpose": (lambda tp, ts: ad.tsum(ad.square(ad.transpose(ts[0]))), [x]),
        "add": (lambda tp, ts: ad.tsum(ad.square(ad.add(ts[0], ts[1]))), [x, y]),
        "add_scalar": (lambda tp, ts: ad.tsum(ad.square(ad.add(ts[0], ts[1]))), [x, s]),
        "sub": (lambda tp, ts: ad.tsum(ad.square(ad.sub(ts[0], ts[1]))), [x, y]),
        "mul": (lambda tp, ts: ad.tsum(ad.square(ad.mul(ts[0], ts[1]))), [x, y]),
        "mul_scalar": (lambda tp, ts: ad.tsum(ad.square(ad.mul(ts[0], ts[1]))), [s, y]),
        "div": (lambda tp, ts: ad.tsum(ad.square(ad.div(ts[0], ts[1]))), [x, xpos]),
        "sigmoid": (lambda tp, ts: ad.tsum(ad.square(ad.sigmoid(ts[0]))), [x]),
        "tanh": (lambda tp, ts: ad.tsum(ad.square(ad.tanh(ts[0]))), [x]),
        "exp": (lambda tp, ts: ad.tsum(ad.square(ad.exp(ts[0]))), [x]),
        "neg": (lambda tp, ts: ad.tsum(ad.square(ad.neg(ts[0]))), [x]),
        "log": (lambda tp, ts: ad.tsum(ad.square(ad.log(ts[0]))), [xpos]),
        "abs": (lambda tp, ts: ad.tsum(ad.square(ad.absval(ts[0]))), [xpos]),
        "square": (lambda tp, ts: ad.tsum(ad.square(ad.square(ts[0]))), [x]),
        "sum": (lambda tp, ts: ad.square(ad.tsum(ts[0])), [x]),
        "mean": (lambda tp, ts: ad.square(ad.tmean(ts[0])), [x]),
        "mse": (lambda tp, ts: ad.mse_loss(ts[0], ts[1]), [x, y]),
    }
    for name, (f, point) in cases.items():
        err = ad.grad_check(f, point, step=1e-5)
        assert err < 1e-5, f"{name}: rel err {err:.2e}"


def test_backward_linearity():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=(4, 4))

    def run(which):
        tape = ad.Tape()
        x = tape.leaf(x0)
        l1 = ad.tsum(ad.square(x))
        l2 = ad.tmean(ad.sigmoid(x))
        if which == "sum":
            loss = ad.add(l1, l2)
        elif which == "l1":
            loss = l1
        else:
            loss = l2
        return ad.backward(loss, tape)[x.node_id]

    combined = run("sum")
    parts = run("l1") + run("l2")
    assert np.max(np.abs(combined - parts)) < 1e-12


def test_backward_replay_bit_identical():
    rng = np.random.default_rng(11)
    tape = ad.Tape()
    x = tape.leaf(rng.normal(size=(5, 3)))
    w = tape.leaf(rng.normal(size=(3, 5)))
    loss = ad.tmean(ad.tanh(ad.matmul(x, w)))
    g1 = ad.backward(loss, tape)
    g2 = ad.backward(loss, tape)
    for nid in g1:
        assert g1[nid].tobytes() == g2[nid].tobytes()


def test_unused_leaf_gets_zero_gradient():
    tape = ad.Tape()
    x = tape.leaf([1.0, 2.0])
    unused = tape.leaf([[3.0]])
    loss = ad.tsum(ad.square(x))
    grads = ad.backward(loss, tape)
    assert np.array_equal(grads[unused.node_id], np.zeros((1, 1)))


def test_pass_through_gradients_never_alias():
    # add() hands the same upstream gradient to both inputs; a later
    # accumulation into one input must not leak into the other
    tape = ad.Tape()
    x = tape.leaf([1.0, 2.0])
    w = tape.leaf([3.0, 4.0])
    y = ad.add(x, w)
    loss = ad.add(ad.tsum(y), ad.tsum(ad.square(x)))
    grads = ad.backward(loss, tape)
    assert np.array_equal(grads[w.node_id], [1.0, 1.0])
    assert np.array_equal(grads[x.node_id], [3.0, 5.0])


def test_gradient_accumulates_over_reuse():
    # y = x*x via mul(x, x): dy/dx = 2x needs both branches accumulated
    tape = ad.Tape()
    x = tape.leaf([3.0])
    loss = ad.tsum(ad.mul(x, x))
    g = ad.backward(loss, tape)[x.node_id]
    assert abs(g[0] - 6.0) < 1e-15


# ---------------------------------------------------------------------------
# Adam

def test_adam_first_step_closed_form():
    # with zero-initialized moments the bias-corrected first update is
    # -lr * g / (|g| + eps) independent of the gradient scale
    params = {"p": np.array([1.0, -2.0])}
    grads = {"p": np.array([2.0, -0.5])}
    st = ad.adam_init(params, lr=0.01)
    new = ad.adam_step(params, grads, st)
    expect = params["p"] - 0.01 * grads["p"] / (np.abs(grads["p"]) + 1e-8)
    assert np.max(np.abs(new["p"] - expect)) < 1e-12
    assert st.t == 1


def test_adam_converges_on_quadratic():
    params = {"p": np.array([5.0])}
    st = ad.adam_init(params, lr=0.1)
    for _ in range(500):
        grads = {"p": 2.0 * params["p"]}
        params = ad.adam_step(params, grads, st)
    assert abs(params["p"][0]) < 1e-3


def test_adam_rejects_bad_gradients():
    params = {"p": np.zeros(3)}
    st = ad.adam_init(params)
    with pytest.raises(ValueError):
        ad.adam_step(params, {"p": np.zeros(2)}, st)
    with pytest.raises(ValueError):
        ad.adam_step(params, {"p": np.array([1.0, np.nan, 0.0])}, st)


# ---------------------------------------------------------------------------
# error surfaces

def test_constructor_rejects_non_finite():
    with pytest.raises(ValueError):
        ad.Tensor([np.inf, 1.0])
    tape = ad.Tape()
    with pytest.raises(ValueError):
        tape.leaf([np.nan])


def test_div_by_zero_element_raises():
    with pytest.raises(ZeroDivisionError):
        ad.div(ad.Tensor([1.0, 2.0]), ad.Tensor([1.0, 0.0]))


def test_log_domain_error():
    with pytest.raises(ValueError):
        ad.log(ad.Tensor([1.0, -1.0]))


def test_exp_overflow_raises():
    with pytest.raises(OverflowError):
        ad.exp(ad.Tensor([1000.0]))


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        ad.add(ad.Tensor(np.zeros((2, 3))), ad.Tensor(np.zeros((3, 2))))
    with pytest.raises(ValueError):
        ad.matmul(ad.Tensor(np.zeros((2, 3))), ad.Tensor(np.zeros((2, 3))))


def test_mixed_tapes_raise():
    t1, t2 = ad.Tape(), ad.Tape()
    a = t1.leaf([1.0])
    b = t2.leaf([2.0])
    with pytest.raises(ValueError):
        ad.add(a, b)


def test_backward_requires_scalar_on_tape():
    tape = ad.Tape()
    x = tape.leaf([1.0, 2.0])
    y = ad.square(x)
    with pytest.raises(ValueError):
        ad.backward(y, tape)  # not scalar
    with pytest.raises(ValueError):
        ad.backward(ad.Tensor([1.0]), tape)  # constant, not on tape
