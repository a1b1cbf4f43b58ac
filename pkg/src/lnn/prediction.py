"""CSI prediction experiment: windowing, featurization, training, baselines.

Windows slide with stride 1 over the CSI sequence; the train/test split is a
time split, and windows that straddle the boundary belong to neither side,
so no time index leaks across. Features are interleaved real/imag columns,
standardized with train-range statistics.

Multi-step prediction is an autoregressive rollout in residual form: after
consuming L_h history steps, the model's readout emits the per-step change,
each prediction is the previous value plus that change, and predictions are
fed back as inputs for the remaining horizons. A hold-everything model
(zero readout) therefore reproduces the naive-hold baseline, and training
only has to learn the channel's motion, which is an order of magnitude
smaller than the values themselves.

Training anneals the rollout depth (1 -> 2 -> 3 -> L_p over fixed epoch
fractions): short horizons first teach the one-step dynamics before
feedback compounding enters the loss, and they are also cheaper, so the
schedule buys more optimizer steps per second. After the gradient phase the
readout is refit in closed form (ridge) against one-step residual targets
and kept only if the full-horizon validation loss improves; the recurrent
dynamics fix the state representation, so the best linear readout on top of
it is a least-squares problem, which Adam solves less precisely than a
direct solve. Reported MSE is per-horizon mean squared complex error on
the physical (de-standardized) scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = ["PredictorHyper", "WindowedDataset", "EvalReport", "Featurizer",
           "make_windows", "train_predictor", "evaluate_mse",
           "baseline_predict", "rollout_predict", "fit_ar"]

DEFAULT_HISTORY = 20
DEFAULT_HORIZON = 5


@dataclass
class PredictorHyper:
    lr: float = 0.005
    batch: int = 64
    epochs: int = 300
    steps_per_epoch: int = 40
    patience: int = 12
    val_fraction: float = 0.1
    # model time units per sample; 1.0 keeps the default tau init [0.5, 2]
    # on the same scale as one feedback interval
    dt_per_step: float = 1.0


class Featurizer:
    """Interleaved re/im features with train-stat standardization."""

    def __init__(self, mean, std):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        if np.any(self.std <= 0):
            raise ValueError("featurizer std must be positive")

    @classmethod
    def fit(cls, csi_block):
        """csi_block: complex (T, C); statistics per real feature column."""
        raw = cls.interleave(csi_block)
        std = raw.std(axis=0)
        std[std == 0] = 1.0
        return cls(raw.mean(axis=0), std)

    @staticmethod
    def interleave(c):
        out = np.empty(c.shape[:-1] + (2 * c.shape[-1],), dtype=float)
        out[..., 0::2] = c.real
        out[..., 1::2] = c.imag
        return out

    @staticmethod
    def deinterleave(r):
        return r[..., 0::2] + 1j * r[..., 1::2]

    def transform(self, c):
        return (self.interleave(c) - self.mean) / self.std

    def inverse(self, feats):
        return self.deinterleave(feats * self.std + self.mean)

    @property
    def n_features(self):
        return self.mean.shape[0]


@dataclass
class WindowedDataset:
    """History/future pairs over a CSI sequence, split along time."""

    csi: np.ndarray            # complex (T, C)
    l_h: int
    l_p: int
    split_at: int              # first time index of the test range
    starts: np.ndarray         # every window start, stride 1
    train_starts: np.ndarray
    test_starts: np.ndarray
    featurizer: Featurizer

    @property
    def n_windows(self):
        return len(self.starts)

    def history(self, starts):
        idx = starts[:, None] + np.arange(self.l_h)[None, :]
        return self.csi[idx]                      # (B, L_h, C)

    def future(self, starts):
        idx = starts[:, None] + self.l_h + np.arange(self.l_p)[None, :]
        return self.csi[idx]                      # (B, L_p, C)


def make_windows(csi, l_h=DEFAULT_HISTORY, l_p=DEFAULT_HORIZON,
                 train_fraction=0.8) -> WindowedDataset:
    csi = np.asarray(csi)
    if csi.ndim > 2:
        csi = csi.reshape(csi.shape[0], -1)
    elif csi.ndim == 1:
        csi = csi[:, None]
    t_len = csi.shape[0]
    if t_len < l_h + l_p:
        raise ValueError(f"need at least {l_h + l_p} steps, got {t_len}")
    starts = np.arange(t_len - l_h - l_p + 1)
    split_at = int(t_len * train_fraction)
    train_starts = starts[starts + l_h + l_p <= split_at]
    test_starts = starts[starts >= split_at]
    featurizer = Featurizer.fit(csi[:split_at] if split_at >= 2 else csi)
    return WindowedDataset(csi=csi, l_h=l_h, l_p=l_p, split_at=split_at,
                           starts=starts, train_starts=train_starts,
                           test_starts=test_starts, featurizer=featurizer)


# ---------------------------------------------------------------------------
# model rollout

def _feed(cell, bd, h, feats_steps, dt):
    """Advance the state over (L, 2C, B) feature steps; no readouts."""
    for t in range(feats_steps.shape[0]):
        h = cell.step(bd, h, Tensor(feats_steps[t]), dt)
    return h


def _rollout(cell, bd, h, last, l_p, dt):
    """Residual rollout from the post-history state.

    last: the final history input (2C, B). The readout is the per-step
    change, so prediction k is prediction k-1 plus the readout, and each
    prediction feeds back as the next input.
    """
    preds = []
    prev = last
    for k in range(l_p):
        if k > 0:
            h = cell.step(bd, h, prev, dt)
        prev = ad.add(prev, cell.readout(bd, h))
        preds.append(prev)
    return preds


def rollout_predict(cell, hist_feats, l_p, dt=1.0):
    """Standardized rollout predictions; hist_feats (B, L_h, 2C) ->
    (B, l_p, 2C). Inference path, no tape."""
    bd = cell.bind()
    batch = hist_feats.shape[0]
    cols = np.ascontiguousarray(hist_feats.transpose(1, 2, 0))  # (L, 2C, B)
    h = _feed(cell, bd, Tensor(cell.zero_state(batch)), cols, dt)
    preds = _rollout(cell, bd, h, Tensor(cols[-1]), l_p, dt)
    return np.stack([p.data.T for p in preds], axis=1)


# ---------------------------------------------------------------------------
# training

def train_predictor(cell, ds: WindowedDataset, hyper: PredictorHyper = None,
                    seed=0):
    """Adam on mean MSE over all horizons; returns (cell, loss curve)."""
    hyper = hyper or PredictorHyper()
    n_feat = ds.featurizer.n_features
    if cell.n_inputs != n_feat or cell.n_outputs != n_feat:
        raise ValueError(
            f"cell i/o {cell.n_inputs}/{cell.n_outputs} does not match "
            f"feature dim {n_feat}")
    rng = np.random.default_rng(seed)
    curve = {"train": [], "val": []}
    if hyper.epochs == 0:
        return cell, curve

    train_starts = ds.train_starts
    if len(train_starts) == 0:
        raise ValueError("no train windows")
    n_val = max(1, int(len(train_starts) * hyper.val_fraction))
    val_starts = train_starts[-n_val:]
    fit_starts = train_starts[:-n_val] if len(train_starts) > n_val else train_starts

    opt = ad.adam_init(cell.params, lr=hyper.lr)
    best_val = np.inf
    stale = 0
    final_phase = int(0.85 * hyper.epochs)

    def rollout_depth(epoch):
        # anneal 1 -> 2 -> 3 -> L_p; short horizons first
        if epoch >= final_phase:
            return ds.l_p
        frac = epoch / hyper.epochs
        if frac < 0.5:
            return 1
        return min(2 if frac < 0.7 else 3, ds.l_p)

    def minibatch_loss(starts, l_p, train=True):
        hist = ds.featurizer.transform(ds.history(starts))
        fut = ds.featurizer.transform(ds.future(starts))
        cols = np.ascontiguousarray(hist.transpose(1, 2, 0))
        tape = ad.Tape() if train else None
        bd = cell.bind(tape)
        h = _feed(cell, bd, Tensor(cell.zero_state(len(starts))), cols,
                  hyper.dt_per_step)
        preds = _rollout(cell, bd, h, Tensor(cols[-1]), l_p,
                         hyper.dt_per_step)
        loss = None
        for k, p in enumerate(preds):
            term = ad.mse_loss(p, Tensor(np.ascontiguousarray(fut[:, k].T)))
            loss = term if loss is None else ad.add(loss, term)
        loss = ad.div(loss, Tensor(float(l_p)))
        return loss, tape, bd

    for epoch in range(hyper.epochs):
        depth = rollout_depth(epoch)
        epoch_losses = []
        for _ in range(hyper.steps_per_epoch):
            starts = rng.choice(fit_starts, size=min(hyper.batch, len(fit_starts)),
                                replace=False)
            loss, tape, bd = minibatch_loss(starts, depth)
            value = float(loss.data)
            if not np.isfinite(value):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}; "
                    "lower the learning rate or check the data")
            grads = bd.named_grads(ad.backward(loss, tape))
            cell.params = ad.adam_step(cell.params, grads, opt)
            cell.constrain()
            epoch_losses.append(value)
        curve["train"].append(float(np.mean(epoch_losses)))

        vloss, _, _ = minibatch_loss(val_starts[:256], ds.l_p, train=False)
        vvalue = float(vloss.data)
        curve["val"].append(vvalue)
        # patience only counts once training reaches the full horizon;
        # earlier phases optimize shallower objectives and their val trend
        # says little about the final one
        if epoch >= final_phase:
            if vvalue < best_val - 1e-6:
                best_val = vvalue
                stale = 0
            else:
                stale += 1
                if stale >= hyper.patience:
                    break
    _refit_readout(cell, ds, hyper, fit_starts, val_starts)
    return cell, curve


def _refit_readout(cell, ds, hyper, fit_starts, val_starts, max_windows=8000,
                   ridge=1e-6):
    """Closed-form ridge refit of the readout, gated on validation MSE.

    The recurrent parameters fix the state representation; the best linear
    readout on top of it against one-step residual targets is then a
    least-squares problem, solved here directly. The solve is dense, so the
    result is kept only if full-horizon validation improves (it would not,
    for example, under an output mask).
    """
    take = min(max_windows, len(fit_starts))
    starts = np.random.default_rng(0).choice(fit_starts, size=take,
                                             replace=False)
    states = []
    resids = []
    for lo in range(0, take, 2000):
        chunk = starts[lo:lo + 2000]
        hist = ds.featurizer.transform(ds.history(chunk))
        fut = ds.featurizer.transform(ds.future(chunk))
        cols = np.ascontiguousarray(hist.transpose(1, 2, 0))
        bd = cell.bind()
        h = _feed(cell, bd, Tensor(cell.zero_state(len(chunk))), cols,
                  hyper.dt_per_step)
        states.append(h.data.T)                   # (B, n_units)
        resids.append(fut[:, 0] - hist[:, -1])    # one-step change
    x1 = np.concatenate(states, axis=0)
    x1 = np.concatenate([x1, np.ones((x1.shape[0], 1))], axis=1)
    y = np.concatenate(resids, axis=0)
    gram = x1.T @ x1 + ridge * np.eye(x1.shape[1])
    w = np.linalg.solve(gram, x1.T @ y)           # (n_units + 1, 2C)

    def val_mse():
        hist = ds.featurizer.transform(ds.history(val_starts[:512]))
        fut = ds.featurizer.transform(ds.future(val_starts[:512]))
        preds = rollout_predict(cell, hist, ds.l_p, dt=hyper.dt_per_step)
        return float(np.mean((preds - fut) ** 2))

    before = val_mse()
    old = (cell.params["W_out"], cell.params["b_out"])
    cell.params["W_out"] = np.ascontiguousarray(w[:-1].T)
    cell.params["b_out"] = np.ascontiguousarray(w[-1:].T)
    if not val_mse() < before:
        cell.params["W_out"], cell.params["b_out"] = old


# ---------------------------------------------------------------------------
# evaluation

@dataclass
class EvalReport:
    scheme: str
    mse: np.ndarray            # length L_p
    seed: int = 0
    scenario_hash: str = ""

    def __post_init__(self):
        self.mse = np.asarray(self.mse, dtype=float)
        if np.any(self.mse < 0):
            raise ValueError("MSE entries must be >= 0")


def evaluate_mse(model, ds: WindowedDataset, scheme=None, seed=0,
                 scenario_hash="", dt=1.0) -> EvalReport:
    """Per-horizon MSE on the physical complex scale over the test windows.

    model: a cell (rolled out autoregressively) or precomputed complex
    predictions of shape (n_test_windows, L_p, C).
    """
    if len(ds.test_starts) == 0:
        raise ValueError("dataset has no test windows")
    truth = ds.future(ds.test_starts)             # (B, L_p, C) complex
    if isinstance(model, np.ndarray):
        preds = model
        name = scheme or "precomputed"
    else:
        hist = ds.featurizer.transform(ds.history(ds.test_starts))
        raw = rollout_predict(model, hist, ds.l_p, dt=dt)
        preds = ds.featurizer.inverse(raw)
        name = scheme or getattr(model, "kind", "model")
    if preds.shape != truth.shape:
        raise ValueError(f"predictions {preds.shape} vs targets {truth.shape}")
    mse = np.mean(np.abs(preds - truth) ** 2, axis=(0, 2))
    return EvalReport(scheme=name, mse=mse, seed=seed,
                      scenario_hash=scenario_hash)


# ---------------------------------------------------------------------------
# baselines

def fit_ar(series_block, order, ridge=1e-6):
    """LS fit of one shared complex AR(order) model.

    series_block: complex (T, C) — every coefficient contributes rows.
    Falls back to ridge regularization when the system is rank-deficient.
    """
    t_len, n_coef = series_block.shape
    if t_len <= order:
        raise ValueError("series shorter than AR order")
    rows = []
    targets = []
    for c in range(n_coef):
        y = series_block[:, c]
        # lag matrix: row t has [y_{t-1}, ..., y_{t-order}]
        cols = [y[order - 1 - i:t_len - 1 - i] for i in range(order)]
        rows.append(np.stack(cols, axis=1))
        targets.append(y[order:])
    a = np.concatenate(rows, axis=0)
    b = np.concatenate(targets, axis=0)
    coef, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < order:
        gram = a.conj().T @ a + ridge * np.eye(order)
        coef = np.linalg.solve(gram, a.conj().T @ b)
    return coef


def _ar_predict(coef, history, l_p):
    """history: complex (B, L_h, C); recursive forecast (B, l_p, C)."""
    order = len(coef)
    buf = history[:, -order:, :].copy()           # (B, order, C)
    out = np.empty((history.shape[0], l_p, history.shape[2]),
                   dtype=history.dtype)
    for k in range(l_p):
        # newest lag first
        pred = np.einsum("i,bic->bc", coef, buf[:, ::-1, :])
        out[:, k] = pred
        buf = np.concatenate([buf[:, 1:], pred[:, None, :]], axis=1)
    return out


def baseline_predict(kind, ds: WindowedDataset, seed=0, order=8,
                     hyper: PredictorHyper = None):
    """Complex test-set predictions (n_test_windows, L_p, C) per scheme."""
    hist = ds.history(ds.test_starts)
    if kind == "naive_hold":
        last = hist[:, -1:, :]
        return np.repeat(last, ds.l_p, axis=1)
    if kind == "ar_ls":
        coef = fit_ar(ds.csi[:ds.split_at], order)
        return _ar_predict(coef, hist, ds.l_p)
    if kind == "gru":
        from .cells import GruCell
        hyper = hyper or PredictorHyper()
        n_feat = ds.featurizer.n_features
        cell = GruCell(n_feat, 32, n_feat, seed=seed)
        cell, _ = train_predictor(cell, ds, hyper, seed=seed)
        feats = ds.featurizer.transform(hist)
        raw = rollout_predict(cell, feats, ds.l_p, dt=hyper.dt_per_step)
        return ds.featurizer.inverse(raw)
    raise ValueError(f"unknown baseline {kind!r}")
