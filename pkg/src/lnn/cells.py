"""Continuous-time recurrent cells: LTC, CfC, and a GRU baseline.

State is a column matrix (n_units, batch); inputs are (n_inputs, batch).
Parameters live as plain float64 arrays on the cell and are bound to a tape
per forward pass, so one cell can serve inference (no tape) and training
(leaf per parameter) with the same step code.

LTC dynamics: dh/dt = -(1/tau + f) * h + f * A with the gate
f = sigmoid(W_rec h + W_in x + b). The production step is the semi-implicit
fused update, unconditionally stable and bounded; RK4 is the reference
solver. The CfC replaces the solver with a sigmoid time gate blending two
candidate branches. Input is zero-order held within a step.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = ["LtcCell", "CfcCell", "GruCell", "Binding", "unroll", "make_cell"]


class Binding:
    """Parameter tensors bound to one tape, plus broadcast caches."""

    def __init__(self, cell, tape, tensors, leaf_ids=None):
        self.cell = cell
        self.tape = tape
        self.tensors = tensors
        # param name -> leaf node_id, for reading named gradients back
        self.leaf_ids = leaf_ids or {}
        self._bcast = {}

    def named_grads(self, grads):
        return {name: grads[nid] for name, nid in self.leaf_ids.items()}

    def __getitem__(self, name) -> Tensor:
        return self.tensors[name]

    def ones_row(self, batch) -> Tensor:
        key = ("ones", batch)
        t = self._bcast.get(key)
        if t is None:
            t = Tensor(np.ones((1, batch)))
            self._bcast[key] = t
        return t

    def cols(self, name, batch) -> Tensor:
        """A column parameter tiled to (n, batch) via matmul with a ones row."""
        if batch == 1:
            return self.tensors[name]
        key = (name, batch)
        t = self._bcast.get(key)
        if t is None:
            t = ad.matmul(self.tensors[name], self.ones_row(batch))
            self._bcast[key] = t
        return t


def _uniform(rng, shape, scale):
    return rng.uniform(-scale, scale, size=shape)


class _CellBase:
    """Shared parameter plumbing: init, binding, masks, readout."""

    kind = ""

    def __init__(self, n_inputs, n_units, n_outputs):
        if n_inputs < 1 or n_units < 1 or n_outputs < 1:
            raise ValueError("cell dimensions must be positive")
        self.n_inputs = n_inputs
        self.n_units = n_units
        self.n_outputs = n_outputs
        self.params: dict[str, np.ndarray] = {}
        # 0/1 gradient-blocking masks, set when a wiring is applied
        self.masks: dict[str, np.ndarray] = {}

    def param_names(self):
        return list(self.params.keys())

    def zero_state(self, batch=1) -> np.ndarray:
        return np.zeros((self.n_units, batch))

    def bind(self, tape=None, override=None) -> Binding:
        """Bind parameters to a tape (leaves) or as constants (tape=None).

        override maps names to already-created tensors; used by gradient
        checks that need to control leaf registration order.
        """
        tensors = {}
        leaf_ids = {}
        for name, value in self.params.items():
            if override is not None and name in override:
                t = override[name]
            elif tape is None:
                t = Tensor(value)
            else:
                t = tape.leaf(value)
            if t.node_id is not None:
                leaf_ids[name] = t.node_id
            mask = self.masks.get(name)
            if mask is not None:
                t = ad.mul(t, Tensor(mask))
            tensors[name] = t
        return Binding(self, tape, tensors, leaf_ids)

    def readout(self, bd: Binding, h: Tensor) -> Tensor:
        batch = h.data.shape[1]
        y = ad.matmul(bd["W_out"], h)
        return ad.add(y, bd.cols("b_out", batch))

    def constrain(self):
        """Clamp parameters back into their domain after an optimizer step."""

    def step(self, bd: Binding, h: Tensor, x: Tensor, dt: float) -> Tensor:
        raise NotImplementedError


class LtcCell(_CellBase):
    kind = "ltc"

    def __init__(self, n_inputs, n_units, n_outputs, seed=0, unfolds=6,
                 solver="fused"):
        super().__init__(n_inputs, n_units, n_outputs)
        if unfolds < 1:
            raise ValueError("unfolds must be >= 1")
        if solver not in ("fused", "rk4"):
            raise ValueError(f"unknown solver {solver!r}")
        self.unfolds = unfolds
        self.solver = solver
        rng = np.random.default_rng(seed)
        n, ni, no = n_units, n_inputs, n_outputs
        self.params = {
            "tau": rng.uniform(0.5, 2.0, size=(n, 1)),
            "A": rng.uniform(-1.0, 1.0, size=(n, 1)),
            "W_rec": _uniform(rng, (n, n), 1.0 / math.sqrt(n)),
            "W_in": _uniform(rng, (n, ni), 1.0 / math.sqrt(ni)),
            "b": np.zeros((n, 1)),
            "W_out": _uniform(rng, (no, n), 1.0 / math.sqrt(n)),
            "b_out": np.zeros((no, 1)),
        }

    TAU_MIN = 1e-3

    def constrain(self):
        np.maximum(self.params["tau"], self.TAU_MIN, out=self.params["tau"])

    def _check_shapes(self, h, x):
        if h.data.shape[0] != self.n_units:
            raise ValueError(f"state has {h.data.shape[0]} units, cell has {self.n_units}")
        if x.data.shape[0] != self.n_inputs:
            raise ValueError(f"input has {x.data.shape[0]} features, cell expects {self.n_inputs}")
        if h.data.shape[1] != x.data.shape[1]:
            raise ValueError("state and input batch sizes differ")

    def _gate(self, bd, h, drive):
        return ad.sigmoid(ad.add(ad.matmul(bd["W_rec"], h), drive))

    def _input_drive(self, bd, x, batch):
        return ad.add(ad.matmul(bd["W_in"], x), bd.cols("b", batch))

    def derivative(self, bd: Binding, h: Tensor, x: Tensor) -> Tensor:
        self._check_shapes(h, x)
        batch = h.data.shape[1]
        f = self._gate(bd, h, self._input_drive(bd, x, batch))
        a = bd.cols("A", batch)
        inv_tau = ad.div(Tensor(1.0), bd.cols("tau", batch))
        leak = ad.add(inv_tau, f)
        return ad.sub(ad.mul(f, a), ad.mul(leak, h))

    def fused_step(self, bd: Binding, h: Tensor, x: Tensor, dt: float,
                   unfolds=None) -> Tensor:
        if dt < 0:
            raise ValueError("dt must be >= 0")
        self._check_shapes(h, x)
        k = self.unfolds if unfolds is None else unfolds
        sub = dt / k
        batch = h.data.shape[1]
        drive = self._input_drive(bd, x, batch)
        a = bd.cols("A", batch)
        inv_tau = ad.div(Tensor(1.0), bd.cols("tau", batch))
        for _ in range(k):
            f = self._gate(bd, h, drive)
            num = ad.add(h, ad.mul(Tensor(sub), ad.mul(f, a)))
            den = ad.add(Tensor(1.0), ad.mul(Tensor(sub), ad.add(inv_tau, f)))
            h = ad.div(num, den)
        return h

    def rk4_step(self, bd: Binding, h: Tensor, x: Tensor, dt: float) -> Tensor:
        if dt < 0:
            raise ValueError("dt must be >= 0")
        self._check_shapes(h, x)
        batch = h.data.shape[1]
        drive = self._input_drive(bd, x, batch)
        a = bd.cols("A", batch)
        inv_tau = ad.div(Tensor(1.0), bd.cols("tau", batch))

        def deriv(state):
            f = self._gate(bd, state, drive)
            return ad.sub(ad.mul(f, a), ad.mul(ad.add(inv_tau, f), state))

        half = Tensor(dt / 2.0)
        k1 = deriv(h)
        k2 = deriv(ad.add(h, ad.mul(half, k1)))
        k3 = deriv(ad.add(h, ad.mul(half, k2)))
        k4 = deriv(ad.add(h, ad.mul(Tensor(dt), k3)))
        acc = ad.add(ad.add(k1, k4), ad.mul(Tensor(2.0), ad.add(k2, k3)))
        return ad.add(h, ad.mul(Tensor(dt / 6.0), acc))

    def step(self, bd, h, x, dt):
        if self.solver == "rk4":
            return self.rk4_step(bd, h, x, dt)
        return self.fused_step(bd, h, x, dt)


class CfcCell(_CellBase):
    """Closed-form cell: time-gated blend of two candidate branches.

    Each branch maps (x, h) through one hidden layer of width n_units:
    out = act(W2 @ tanh(Wx x + Wh h + b1) + b2). The f branch output is
    linear (it feeds the time gate), g and h branches are tanh-bounded.
    """

    kind = "cfc"
    BRANCHES = ("f", "g", "h")

    def __init__(self, n_inputs, n_units, n_outputs, seed=0):
        super().__init__(n_inputs, n_units, n_outputs)
        rng = np.random.default_rng(seed)
        n, ni, no = n_units, n_inputs, n_outputs
        p = {}
        for br in self.BRANCHES:
            p[f"Wx_{br}"] = _uniform(rng, (n, ni), 1.0 / math.sqrt(ni))
            p[f"Wh_{br}"] = _uniform(rng, (n, n), 1.0 / math.sqrt(n))
            p[f"b1_{br}"] = np.zeros((n, 1))
            p[f"W2_{br}"] = _uniform(rng, (n, n), 1.0 / math.sqrt(n))
            p[f"b2_{br}"] = np.zeros((n, 1))
        p["W_out"] = _uniform(rng, (no, n), 1.0 / math.sqrt(n))
        p["b_out"] = np.zeros((no, 1))
        self.params = p

    def _branch(self, bd, br, h, x, batch, linear):
        hid = ad.tanh(ad.add(ad.add(ad.matmul(bd[f"Wx_{br}"], x),
                                    ad.matmul(bd[f"Wh_{br}"], h)),
                             bd.cols(f"b1_{br}", batch)))
        out = ad.add(ad.matmul(bd[f"W2_{br}"], hid), bd.cols(f"b2_{br}", batch))
        return out if linear else ad.tanh(out)

    def step(self, bd: Binding, h: Tensor, x: Tensor, dt: float) -> Tensor:
        if dt < 0:
            raise ValueError("dt must be >= 0")
        if h.data.shape[0] != self.n_units or x.data.shape[0] != self.n_inputs:
            raise ValueError("state/input shape mismatch")
        batch = h.data.shape[1]
        f_out = self._branch(bd, "f", h, x, batch, linear=True)
        g_out = self._branch(bd, "g", h, x, batch, linear=False)
        h_cand = self._branch(bd, "h", h, x, batch, linear=False)
        gate = ad.sigmoid(ad.mul(Tensor(-dt), f_out))
        keep = ad.sub(Tensor(1.0), gate)
        return ad.add(ad.mul(gate, g_out), ad.mul(keep, h_cand))


class GruCell(_CellBase):
    kind = "gru"

    def __init__(self, n_inputs, n_units, n_outputs, seed=0):
        super().__init__(n_inputs, n_units, n_outputs)
        rng = np.random.default_rng(seed)
        n, ni, no = n_units, n_inputs, n_outputs
        p = {}
        for gate in ("z", "r", "c"):
            p[f"W_{gate}"] = _uniform(rng, (n, ni), 1.0 / math.sqrt(ni))
            p[f"U_{gate}"] = _uniform(rng, (n, n), 1.0 / math.sqrt(n))
            p[f"b_{gate}"] = np.zeros((n, 1))
        p["W_out"] = _uniform(rng, (no, n), 1.0 / math.sqrt(n))
        p["b_out"] = np.zeros((no, 1))
        self.params = p

    def step(self, bd: Binding, h: Tensor, x: Tensor, dt: float = 0.0) -> Tensor:
        if h.data.shape[0] != self.n_units or x.data.shape[0] != self.n_inputs:
            raise ValueError("state/input shape mismatch")
        if h.data.shape[1] != x.data.shape[1]:
            raise ValueError("state and input batch sizes differ")
        batch = h.data.shape[1]

        def gate_pre(g, state):
            return ad.add(ad.add(ad.matmul(bd[f"W_{g}"], x),
                                 ad.matmul(bd[f"U_{g}"], state)),
                          bd.cols(f"b_{g}", batch))

        z = ad.sigmoid(gate_pre("z", h))
        r = ad.sigmoid(gate_pre("r", h))
        cand = ad.tanh(ad.add(ad.add(ad.matmul(bd["W_c"], x),
                                     ad.matmul(bd["U_c"], ad.mul(r, h))),
                              bd.cols("b_c", batch)))
        keep = ad.sub(Tensor(1.0), z)
        return ad.add(ad.mul(keep, h), ad.mul(z, cand))


def unroll(cell, bd: Binding, h0: Tensor, inputs, dts):
    """Run the cell over a sequence; returns (per-step readouts, final state).

    inputs: sequence of (n_inputs, batch) tensors; dts: per-step seconds.
    """
    if len(inputs) != len(dts):
        raise ValueError(f"{len(inputs)} inputs vs {len(dts)} dts")
    h = h0
    outputs = []
    for x, dt in zip(inputs, dts):
        h = cell.step(bd, h, x, dt)
        outputs.append(cell.readout(bd, h))
    return outputs, h


def make_cell(kind, n_inputs, n_units, n_outputs, seed=0, unfolds=6):
    if kind == "ltc":
        return LtcCell(n_inputs, n_units, n_outputs, seed=seed, unfolds=unfolds)
    if kind == "ltc-rk4":
        return LtcCell(n_inputs, n_units, n_outputs, seed=seed, unfolds=unfolds,
                       solver="rk4")
    if kind == "cfc":
        return CfcCell(n_inputs, n_units, n_outputs, seed=seed)
    if kind == "gru":
        return GruCell(n_inputs, n_units, n_outputs, seed=seed)
    raise ValueError(f"unknown cell kind {kind!r}")
