"""Reverse-mode automatic differentiation on a define-by-run tape.

Everything downstream (cells, training loops, the sum-SE gradient) runs on
this module. Values are float64 numpy arrays; a Tape records each primitive
application eagerly, and backward() replays the records in reverse to
accumulate gradients for every leaf. Complex quantities never reach the tape:
callers lower them to stacked real/imag parts first.

Broadcasting is deliberately narrow: elementwise ops accept equal shapes or a
one-element tensor against anything. Column broadcasts (a bias against a
batch) are written explicitly as matmul against a row of ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Tensor", "Tape", "AdamState",
    "matmul", "transpose", "add", "sub", "mul", "div",
    "sigmoid", "tanh", "exp", "neg", "log", "absval", "square",
    "tsum", "tmean", "mse_loss",
    "backward", "adam_step", "adam_init", "grad_check",
]


class Tensor:
    """A float64 array with an optional handle into a recording tape.

    node_id is None for constants; tensors made through Tape.leaf or produced
    by an op with at least one recorded operand carry the tape that owns them.
    """

    __slots__ = ("data", "node_id", "tape")

    def __init__(self, data, node_id=None, tape=None, _checked=False):
        arr = np.asarray(data, dtype=np.float64)
        if not _checked and not np.all(np.isfinite(arr)):
            raise ValueError("tensor contains non-finite elements")
        self.data = arr
        self.node_id = node_id
        self.tape = tape

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = "const" if self.node_id is None else f"node {self.node_id}"
        return f"Tensor({tag}, shape={self.data.shape})"

    # Operator sugar; scalars are promoted to constants.
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _coerce(other))


def _coerce(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


class Tape:
    """Recording context. One tape per forward pass, single-threaded.

    records hold (op, out_id, input ids, saved arrays) tuples; leaf_ids keeps
    the nodes the caller registered as differentiable parameters so backward
    can hand back a gradient for every one of them, used or not.
    """

    def __init__(self):
        self.records = []
        self.shapes = {}
        self.leaf_ids = []
        self._next_id = 0

    def _new_id(self, shape):
        nid = self._next_id
        self._next_id += 1
        self.shapes[nid] = shape
        return nid

    def leaf(self, data) -> Tensor:
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("leaf contains non-finite elements")
        nid = self._new_id(arr.shape)
        self.leaf_ids.append(nid)
        return Tensor(arr, node_id=nid, tape=self, _checked=True)

    def record(self, op, out, inputs, saved):
        nid = self._new_id(out.shape)
        self.records.append((op, nid, inputs, saved))
        return nid


def _tape_of(*ts):
    tape = None
    for t in ts:
        if t.node_id is not None:
            if tape is None:
                tape = t.tape
            elif t.tape is not tape:
                raise ValueError("operands belong to different tapes")
    return tape


def _result(tape, op, out, in_ids, saved):
    if tape is None:
        return Tensor(out, _checked=True)
    nid = tape.record(op, out, in_ids, saved)
    return Tensor(out, node_id=nid, tape=tape, _checked=True)


def _ids(*ts):
    return tuple(t.node_id for t in ts)


# ---------------------------------------------------------------------------
# primitives

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects rank-2 tensors")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul inner dimensions differ: {a.data.shape} vs {b.data.shape}")
    tape = _tape_of(a, b)
    out = a.data @ b.data
    return _result(tape, "matmul", out, _ids(a, b), (a.data, b.data))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ValueError("transpose expects a rank-2 tensor")
    tape = _tape_of(a)
    return _result(tape, "transpose", np.ascontiguousarray(a.data.T),
                   _ids(a), None)


def _check_ew_shapes(a, b):
    sa, sb = a.data.shape, b.data.shape
    if sa == sb or a.data.size == 1 or b.data.size == 1:
        return
    raise ValueError(f"elementwise shapes differ and neither is scalar: {sa} vs {sb}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_ew_shapes(a, b)
    tape = _tape_of(a, b)
    out = a.data + b.data
    return _result(tape, "add", out, _ids(a, b),
                   (a.data.shape, b.data.shape))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_ew_shapes(a, b)
    tape = _tape_of(a, b)
    out = a.data - b.data
    return _result(tape, "sub", out, _ids(a, b),
                   (a.data.shape, b.data.shape))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_ew_shapes(a, b)
    tape = _tape_of(a, b)
    out = a.data * b.data
    return _result(tape, "mul", out, _ids(a, b), (a.data, b.data))


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_ew_shapes(a, b)
    if np.any(b.data == 0.0):
        raise ZeroDivisionError("div by tensor with zero element")
    tape = _tape_of(a, b)
    out = a.data / b.data
    return _result(tape, "div", out, _ids(a, b), (a.data, b.data))


def sigmoid(a: Tensor) -> Tensor:
    tape = _tape_of(a)
    x = a.data
    # split by sign to keep exp() in the underflow-only regime
    out = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _result(tape, "sigmoid", out, _ids(a), (out,))


def tanh(a: Tensor) -> Tensor:
    tape = _tape_of(a)
    out = np.tanh(a.data)
    return _result(tape, "tanh", out, _ids(a), (out,))


def exp(a: Tensor) -> Tensor:
    tape = _tape_of(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    if not np.all(np.isfinite(out)):
        raise OverflowError("exp overflow to non-finite value")
    return _result(tape, "exp", out, _ids(a), (out,))


def neg(a: Tensor) -> Tensor:
    tape = _tape_of(a)
    return _result(tape, "neg", -a.data, _ids(a), None)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise ValueError("log of non-positive element")
    tape = _tape_of(a)
    return _result(tape, "log", np.log(a.data), _ids(a), (a.data,))


def absval(a: Tensor) -> Tensor:
    tape = _tape_of(a)
    return _result(tape, "abs", np.abs(a.data), _ids(a), (a.data,))


def square(a: Tensor) -> Tensor:
    tape = _tape_of(a)
    return _result(tape, "square", a.data * a.data, _ids(a), (a.data,))


def tsum(a: Tensor) -> Tensor:
    tape = _tape_of(a)
    out = np.array(a.data.sum())
    return _result(tape, "sum", out, _ids(a), (a.data.shape,))


def tmean(a: Tensor) -> Tensor:
    tape = _tape_of(a)
    out = np.array(a.data.mean())
    return _result(tape, "mean", out, _ids(a), (a.data.shape,))


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.data.shape != target.data.shape:
        raise ValueError("mse_loss operands must share a shape")
    tape = _tape_of(pred, target)
    diff = pred.data - target.data
    out = np.array(np.mean(diff * diff))
    return _result(tape, "mse", out, _ids(pred, target), (diff,))


# ---------------------------------------------------------------------------
# backward

def _acc(grads, nid, g, shape):
    """Accumulate g into grads[nid], reducing over a scalar broadcast.

    Always copies on first store: pass-through ops (add, sub) hand the
    upstream gradient object to several inputs, and in-place accumulation
    must never alias across nodes.
    """
    if nid is None:
        return
    if g.shape != shape:
        g = np.array(g.sum()).reshape(shape)
    cur = grads.get(nid)
    if cur is None:
        grads[nid] = g.copy()
    else:
        cur += g


def backward(loss: Tensor, tape: Tape) -> dict:
    """Gradients of a scalar loss w.r.t. every leaf, keyed by node_id.

    Leaves that do not influence the loss get exact zero arrays. The sweep
    never mutates the tape, so replaying is bit-identical.
    """
    if loss.node_id is None or loss.tape is not tape:
        raise ValueError("loss is not a node of this tape")
    if loss.data.size != 1:
        raise ValueError("loss must be a scalar")

    grads = {loss.node_id: np.ones(loss.data.shape)}
    for op, out_id, in_ids, saved in reversed(tape.records):
        g = grads.get(out_id)
        if g is None:
            continue
        if op == "matmul":
            a, b = saved
            _acc(grads, in_ids[0], g @ b.T, a.shape)
            _acc(grads, in_ids[1], a.T @ g, b.shape)
        elif op == "transpose":
            _acc(grads, in_ids[0], g.T, g.T.shape)
        elif op == "add":
            sa, sb = saved
            _acc(grads, in_ids[0], g, sa)
            _acc(grads, in_ids[1], g, sb)
        elif op == "sub":
            sa, sb = saved
            _acc(grads, in_ids[0], g, sa)
            _acc(grads, in_ids[1], -g, sb)
        elif op == "mul":
            a, b = saved
            _acc(grads, in_ids[0], g * b, a.shape)
            _acc(grads, in_ids[1], g * a, b.shape)
        elif op == "div":
            a, b = saved
            _acc(grads, in_ids[0], g / b, a.shape)
            _acc(grads, in_ids[1], -g * a / (b * b), b.shape)
        elif op == "sigmoid":
            (y,) = saved
            _acc(grads, in_ids[0], g * y * (1.0 - y), y.shape)
        elif op == "tanh":
            (y,) = saved
            _acc(grads, in_ids[0], g * (1.0 - y * y), y.shape)
        elif op == "exp":
            (y,) = saved
            _acc(grads, in_ids[0], g * y, y.shape)
        elif op == "neg":
            _acc(grads, in_ids[0], -g, g.shape)
        elif op == "log":
            (x,) = saved
            _acc(grads, in_ids[0], g / x, x.shape)
        elif op == "abs":
            (x,) = saved
            _acc(grads, in_ids[0], g * np.sign(x), x.shape)
        elif op == "square":
            (x,) = saved
            _acc(grads, in_ids[0], g * (2.0 * x), x.shape)
        elif op == "sum":
            (shape,) = saved
            _acc(grads, in_ids[0], np.broadcast_to(g, shape), shape)
        elif op == "mean":
            (shape,) = saved
            n = 1
            for s in shape:
                n *= s
            _acc(grads, in_ids[0], np.broadcast_to(g / n, shape), shape)
        elif op == "mse":
            (diff,) = saved
            d = g * (2.0 / diff.size) * diff
            _acc(grads, in_ids[0], d, diff.shape)
            _acc(grads, in_ids[1], -d, diff.shape)
        else:  # pragma: no cover
            raise RuntimeError(f"unknown op on tape: {op}")

    out = {}
    for nid in tape.leaf_ids:
        g = grads.get(nid)
        out[nid] = np.zeros(tape.shapes[nid]) if g is None else g
    return out


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators plus step count."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: dict, lr: float = 0.01, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    st = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for k, p in params.items():
        st.m[k] = np.zeros_like(p)
        st.v[k] = np.zeros_like(p)
    return st


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """One Adam update with bias correction. Mutates state, returns new params."""
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    out = {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {k!r}: {g.shape} vs {p.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient element for {k!r}")
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / (1.0 - b1 ** t)
        vhat = v / (1.0 - b2 ** t)
        out[k] = p - state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return out


# ---------------------------------------------------------------------------
# finite-difference oracle

def grad_check(f, point, step: float = 1e-5) -> float:
    """Max relative error between backward() and central finite differences.

    f(tape, tensors) must build a scalar loss from leaves created for each
    array in point. Central differences are evaluated coordinate by
    coordinate on fresh constant-only passes.
    """
    point = [np.asarray(p, dtype=np.float64) for p in point]

    tape = Tape()
    leaves = [tape.leaf(p) for p in point]
    loss = f(tape, leaves)
    grads = backward(loss, tape)
    anal = [grads[leaf.node_id] for leaf in leaves]

    def value_at(arrays):
        t2 = Tape()
        return float(f(t2, [t2.leaf(a) for a in arrays]).data)

    worst = 0.0
    for i, p in enumerate(point):
        flat = p.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = value_at(point)
            flat[j] = orig - step
            dn = value_at(point)
            flat[j] = orig
            fd = (up - dn) / (2.0 * step)
            a = anal[i].reshape(-1)[j]
            err = abs(a - fd) / max(1.0, abs(a), abs(fd))
            if err > worst:
                worst = err
    return worst
