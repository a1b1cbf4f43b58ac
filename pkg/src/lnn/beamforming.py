"""Downlink sum-SE math, WMMSE and reference precoders, and the online
gradient-fed NCP optimizer ("GLNN") over the three-phase dynamic channel.

Complex quantities enter the autodiff tape as real/imag pairs. The per-user
rate log2 det(Q + S) - log2 det(Q) is assembled from tape primitives:
complex matmuls lowered to four real matmuls, and determinants of the small
receive-side matrices expanded by cofactors over scalar entries. That keeps
the whole spectral-efficiency objective differentiable with respect to both
the precoders (for the gradient features) and the network parameters (for
the online Adam update).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .cells import make_cell
from .channel import BeamformingScenario, beamforming_channel_sequence
from .wiring import WiringConfig, apply_masks, build_wiring

__all__ = ["PrecoderSet", "SeTrace", "GlnnConfig", "sum_se", "se_gradient",
           "power_project", "wmmse_solve", "reference_precoders",
           "run_glnn_experiment", "summarize_trace"]

LN2 = float(np.log(2.0))


@dataclass
class PrecoderSet:
    """Per-user precoders V_k (M x d), with the budget they must satisfy."""

    v: np.ndarray              # complex (K, M, d)
    p_max: float
    noise: float

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=complex)
        if self.v.ndim != 3:
            raise ValueError(f"precoders must be (K, M, d), got {self.v.shape}")
        if not np.all(np.isfinite(self.v)):
            raise ValueError("precoders contain non-finite entries")
        if self.p_max <= 0 or self.noise <= 0:
            raise ValueError("p_max and noise must be positive")

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.v) ** 2))

    def budget_ok(self, tol=1e-9) -> bool:
        return self.total_power() <= self.p_max + tol


def _check_pair(h, v):
    h = np.asarray(h, dtype=complex)
    if h.ndim != 3:
        raise ValueError(f"channels must be (K, N_r, M), got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("channel contains non-finite entries")
    if v.v.shape[0] != h.shape[0] or v.v.shape[1] != h.shape[2]:
        raise ValueError(f"channel {h.shape} and precoders {v.v.shape} "
                         "disagree on K or M")
    return h


def sum_se(h, v: PrecoderSet) -> float:
    """R = sum_k log2 det(I + S_k Q_k^-1), bits/s/Hz."""
    h = _check_pair(h, v)
    n_users, n_r, _ = h.shape
    eye = np.eye(n_r)
    hv = np.einsum("krm,jmd->kjrd", h, v.v)        # H_k V_j
    rate = 0.0
    for k in range(n_users):
        cov = v.noise * eye + 0j
        for j in range(n_users):
            cov = cov + hv[k, j] @ hv[k, j].conj().T
        q = cov - hv[k, k] @ hv[k, k].conj().T
        sign_t, ld_t = np.linalg.slogdet(cov)
        sign_q, ld_q = np.linalg.slogdet(q)
        assert sign_q.real > 0 and np.isfinite(ld_q), \
            "interference-plus-noise matrix must be positive definite"
        assert sign_t.real > 0 and np.isfinite(ld_t)
        rate += (ld_t - ld_q) / LN2
    return float(rate)


def power_project(v: PrecoderSet, p_max=None) -> PrecoderSet:
    budget = v.p_max if p_max is None else p_max
    total = v.total_power()
    if total <= budget:
        return v
    scaled = v.v * np.sqrt(budget / total)
    return PrecoderSet(scaled, budget, v.noise)


# ---------------------------------------------------------------------------
# lowered rate graph

def _cmatmul(a, b):
    ar, ai = a
    br, bi = b
    re = ad.sub(ad.matmul(ar, br), ad.matmul(ai, bi))
    im = ad.add(ad.matmul(ar, bi), ad.matmul(ai, br))
    return re, im


def _chermitian(a):
    ar, ai = a
    return ad.transpose(ar), ad.neg(ad.transpose(ai))


def _cadd(a, b):
    return ad.add(a[0], b[0]), ad.add(a[1], b[1])


def _centries(mat, masks):
    """Extract every scalar entry of a lowered (n x n) pair via one-hot
    mask reductions; returns a dict (i, j) -> (re, im) scalar tensors."""
    re_t, im_t = mat
    out = {}
    for (i, j), m in masks.items():
        out[(i, j)] = (ad.tsum(ad.mul(re_t, m)), ad.tsum(ad.mul(im_t, m)))
    return out


def _scalar_cmul(a, b):
    ar, ai = a
    br, bi = b
    return (ad.sub(ad.mul(ar, br), ad.mul(ai, bi)),
            ad.add(ad.mul(ar, bi), ad.mul(ai, br)))


def _cdet(entries, rows, cols):
    """Cofactor expansion along the first row; fine for the small receive
    dimensions used here (cost grows factorially)."""
    if len(rows) == 1:
        return entries[(rows[0], cols[0])]
    acc = None
    for pos, c in enumerate(cols):
        minor = _cdet(entries, rows[1:], cols[:pos] + cols[pos + 1:])
        term = _scalar_cmul(entries[(rows[0], c)], minor)
        if pos % 2 == 1:
            term = (ad.neg(term[0]), ad.neg(term[1]))
        acc = term if acc is None else _cadd(acc, term)
    return acc


def _entry_masks(n):
    masks = {}
    for i in range(n):
        for j in range(n):
            m = np.zeros((n, n))
            m[i, j] = 1.0
            masks[(i, j)] = Tensor(m)
    return masks


def _log2det_hermitian(mat, masks, n):
    # the imag part of det() vanishes identically on hermitian-by-
    # construction inputs, so only the real branch feeds the loss
    det_re, _ = _cdet(_centries(mat, masks), list(range(n)), list(range(n)))
    return ad.div(ad.log(det_re), Tensor(LN2))


def rate_graph(h, v_pairs, noise):
    """Sum SE as a scalar tape node.

    h: complex (K, N_r, M) constants; v_pairs: list of (re, im) tensor
    pairs, one per user, each M x d. Returns R in bits/s/Hz.
    """
    n_users, n_r, _ = h.shape
    masks = _entry_masks(n_r)
    eye = Tensor(noise * np.eye(n_r))
    zero = Tensor(np.zeros((n_r, n_r)))
    h_pairs = [(Tensor(h[k].real.copy()), Tensor(h[k].imag.copy()))
               for k in range(n_users)]
    rate = None
    for k in range(n_users):
        own = None
        q = (eye, zero)
        for j in range(n_users):
            g = _cmatmul(h_pairs[k], v_pairs[j])
            s = _cmatmul(g, _chermitian(g))
            if j == k:
                own = s
            else:
                q = _cadd(q, s)
        t = _cadd(q, own)
        term = ad.sub(_log2det_hermitian(t, masks, n_r),
                      _log2det_hermitian(q, masks, n_r))
        rate = term if rate is None else ad.add(rate, term)
    return rate


def se_gradient(h, v: PrecoderSet) -> np.ndarray:
    """dR/dV as a complex array (K, M, d): real part = dR/dRe(V),
    imag part = dR/dIm(V)."""
    h = _check_pair(h, v)
    tape = ad.Tape()
    pairs = []
    ids = []
    for k in range(h.shape[0]):
        re = tape.leaf(v.v[k].real)
        im = tape.leaf(v.v[k].imag)
        pairs.append((re, im))
        ids.append((re.node_id, im.node_id))
    rate = rate_graph(h, pairs, v.noise)
    grads = ad.backward(rate, tape)
    return np.stack([grads[ri] + 1j * grads[ii] for ri, ii in ids])


# ---------------------------------------------------------------------------
# WMMSE baseline

def _mrt_v(h, p_max):
    n_users = h.shape[0]
    v = np.transpose(h.conj(), (0, 2, 1)).copy()   # (K, M, N_r)
    for k in range(n_users):
        nrm = np.linalg.norm(v[k])
        v[k] = v[k] * (np.sqrt(p_max / n_users) / nrm) if nrm > 1e-300 else 0.0
    return v


def _precoder_power(lam, r_m, mu):
    return float(np.sum(r_m / (lam + mu) ** 2))


def _solve_power_multiplier(lam, r_m, p_max):
    """Smallest mu >= 0 with sum_m r_m / (lam_m + mu)^2 <= p_max."""
    if lam.min() > 1e-12 and _precoder_power(lam, r_m, 0.0) <= p_max:
        return 0.0
    hi = 1.0
    for _ in range(200):
        if _precoder_power(lam, r_m, hi) <= p_max:
            break
        hi *= 2.0
    else:
        raise RuntimeError(
            "power multiplier bracket expansion failed: power("
            f"{hi:.3e}) = {_precoder_power(lam, r_m, hi):.3e} > {p_max:.3e}")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _precoder_power(lam, r_m, mid) <= p_max:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    # the upper end is feasible by construction
    return hi


def wmmse_solve(h, p_max, noise, max_iters=200, tol=1e-6, v_init=None):
    """Alternating MMSE-receiver / weight / precoder updates.

    Returns (PrecoderSet, objective trace): the trace holds the sum SE
    after each precoder update and never decreases (block-coordinate
    ascent on the equivalent weighted-MSE problem).
    """
    h = np.asarray(h, dtype=complex)
    n_users, n_r, n_tx = h.shape
    d = n_r
    eye_r = np.eye(n_r)
    eye_d = np.eye(d)
    if v_init is not None:
        _check_pair(h, v_init)
        v = v_init.v.copy()
    else:
        v = _mrt_v(h, p_max)
    trace = []
    prev = -np.inf
    for _ in range(max_iters):
        hv = np.einsum("krm,jmd->kjrd", h, v)
        u = []
        w = []
        for k in range(n_users):
            cov = noise * eye_r + 0j
            for j in range(n_users):
                cov = cov + hv[k, j] @ hv[k, j].conj().T
            u_k = np.linalg.solve(cov, hv[k, k])
            e_k = eye_d - u_k.conj().T @ hv[k, k]
            w.append(np.linalg.inv(e_k))
            u.append(u_k)
        a = np.zeros((n_tx, n_tx), dtype=complex)
        b = []
        for k in range(n_users):
            huw = h[k].conj().T @ u[k] @ w[k]
            a += huw @ u[k].conj().T @ h[k]
            b.append(huw)
        a = 0.5 * (a + a.conj().T)
        lam, phi = np.linalg.eigh(a)
        lam = np.maximum(lam, 0.0)
        bt = np.stack([phi.conj().T @ b[k] for k in range(n_users)])
        r_m = np.sum(np.abs(bt) ** 2, axis=(0, 2))
        mu = _solve_power_multiplier(lam, r_m, p_max)
        v = np.einsum("mn,knd->kmd", phi, bt / (lam + mu)[None, :, None])
        rate = sum_se(h, PrecoderSet(v, p_max, noise))
        trace.append(rate)
        if rate - prev < tol:
            break
        prev = rate
    return PrecoderSet(v, p_max, noise), np.array(trace)


def reference_precoders(kind, h, p_max, noise=1.0) -> PrecoderSet:
    """mrt: per-user matched filters; zf: pseudo-inverse nulling.
    Both split the budget equally across users."""
    h = np.asarray(h, dtype=complex)
    n_users, n_r, n_tx = h.shape
    if kind == "mrt":
        return PrecoderSet(_mrt_v(h, p_max), p_max, noise)
    if kind == "zf":
        if n_tx < n_users * n_r:
            raise ValueError(f"zf needs M >= K*N_r, got M={n_tx}, "
                             f"K*N_r={n_users * n_r}")
        stacked = h.reshape(n_users * n_r, n_tx)
        pinv = stacked.conj().T @ np.linalg.inv(stacked @ stacked.conj().T)
        v = np.zeros((n_users, n_tx, n_r), dtype=complex)
        for k in range(n_users):
            block = pinv[:, k * n_r:(k + 1) * n_r]
            nrm = np.linalg.norm(block)
            v[k] = block * (np.sqrt(p_max / n_users) / nrm) if nrm > 1e-300 else 0.0
        return PrecoderSet(v, p_max, noise)
    raise ValueError(f"unknown reference precoder {kind!r}")


# ---------------------------------------------------------------------------
# online GLNN loop

@dataclass
class GlnnConfig:
    """Recorded defaults for the online optimizer; 30 liquid neurons."""

    n_inter: int = 16
    n_command: int = 10
    n_motor: int = 4
    sensory_dim: int = 64
    cell_kind: str = "cfc"
    lr: float = 0.0005
    dt: float = 1.0
    # gradient-feed refinement passes per interval; the parameters still
    # get exactly one Adam step per interval, on -R at the last pass
    n_inner: int = 12
    # constant part of the gradient gain: at initialization the loop
    # behaves like fixed-step normalized gradient ascent and the network
    # learns the residual around it
    base_gain: float = 0.2
    # "full" adds a learned bias and low-rank correction to the increment;
    # "gain" keeps only the motor-modulated gradient gains
    map_terms: str = "full"
    fanout_sensory: int = 4
    fanout_inter: int = 4
    fanin_motor: int = 4
    n_command_recurrent: int = 20
    wmmse_reinit: bool = False
    wmmse_iters: int = 200
    wmmse_tol: float = 1e-6

    @property
    def n_units(self):
        return self.n_inter + self.n_command + self.n_motor


@dataclass
class SeTrace:
    """Per-step SE for each scheme over one scenario run."""

    se: dict
    phase_index: np.ndarray
    seed: int

    def __post_init__(self):
        n = len(self.phase_index)
        for name, arr in self.se.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"trace for {name} has shape {arr.shape}, "
                                 f"want ({n},)")
            if np.any(arr < -1e-12):
                raise ValueError(f"negative SE in trace for {name}")
            self.se[name] = arr

    @property
    def n_steps(self):
        return len(self.phase_index)


def _interleave_flat(c):
    out = np.empty(2 * c.size)
    flat = c.ravel()
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out


def _glnn_features(grad, v):
    gn = np.linalg.norm(grad)
    vn = np.linalg.norm(v)
    g = _interleave_flat(grad) / (1.0 + gn)
    p = _interleave_flat(v) / (1.0 + vn)
    norms = np.array([gn / (1.0 + gn), vn / (1.0 + vn)])
    return np.concatenate([g, p, norms])


class _GlnnState:
    """NCP cell plus the motor-to-increment map and one Adam optimizer."""

    def __init__(self, sc: BeamformingScenario, cfg: GlnnConfig, seed):
        if cfg.map_terms not in ("full", "gain"):
            raise ValueError(f"unknown map_terms {cfg.map_terms!r}")
        if cfg.n_inner < 1:
            raise ValueError("n_inner must be >= 1")
        self.cfg = cfg
        k, m, d = sc.n_users, sc.n_bs_antennas, sc.n_user_antennas
        self.kmd = (k, m, d)
        rng = np.random.default_rng(seed)
        raw_dim = 4 * k * m * d + 2
        self.proj = rng.standard_normal((cfg.sensory_dim, raw_dim))
        self.proj /= np.sqrt(raw_dim)
        wiring_cfg = WiringConfig(
            n_sensory=cfg.sensory_dim, n_inter=cfg.n_inter,
            n_command=cfg.n_command, n_motor=cfg.n_motor,
            fanout_sensory=cfg.fanout_sensory, fanout_inter=cfg.fanout_inter,
            fanin_motor=cfg.fanin_motor,
            n_command_recurrent=cfg.n_command_recurrent,
            seed=int(rng.integers(0, 2 ** 31)))
        self.cell = make_cell(cfg.cell_kind, cfg.sensory_dim, cfg.n_units,
                              cfg.n_motor, seed=int(rng.integers(0, 2 ** 31)))
        apply_masks(build_wiring(wiring_cfg), self.cell)
        pick = np.zeros((cfg.n_motor, cfg.n_units))
        pick[:, cfg.n_units - cfg.n_motor:] = np.eye(cfg.n_motor)
        self.motor_pick = Tensor(pick)
        # one-hot row selectors that place a motor-driven column into
        # column c of the (M, d) increment
        self.col_onehots = [Tensor(np.eye(d)[c:c + 1, :]) for c in range(d)]
        self.ones_col = Tensor(np.ones((m, 1)))
        self.base_gain = Tensor(cfg.base_gain * np.ones((m, d)))
        # zero init: the loop starts as fixed-step normalized gradient
        # ascent (base_gain) and the network learns the residual policy
        self.map_params = {}
        for uk in range(k):
            for part in ("r", "i"):
                self.map_params[f"gain_{part}_{uk}"] = np.zeros((d, cfg.n_motor))
                if cfg.map_terms == "full":
                    self.map_params[f"bias_{part}_{uk}"] = np.zeros((m, d))
                    for c in range(d):
                        self.map_params[f"w_{part}_{uk}_{c}"] = \
                            np.zeros((m, cfg.n_motor))
        self.h_state = self.cell.zero_state(1)
        flat = {f"cell.{n}": p for n, p in self.cell.params.items()}
        flat.update({f"map.{n}": p for n, p in self.map_params.items()})
        self.opt = ad.adam_init(flat, lr=cfg.lr)

    def _increment(self, leaves, motor, grad):
        """Per-user complex increments, linear in the motor activations:
        learned per-column gains on the per-user-normalized SE gradient
        plus a learned low-rank correction and bias."""
        k, m, d = self.kmd
        deltas = []
        for uk in range(k):
            gn = grad[uk] / (1.0 + np.linalg.norm(grad[uk]))
            parts = []
            for part, base in (("r", gn.real), ("i", gn.imag)):
                gain = ad.matmul(leaves[f"gain_{part}_{uk}"], motor)  # (d,1)
                colmat = ad.add(ad.matmul(self.ones_col, ad.transpose(gain)),
                                self.base_gain)
                acc = ad.mul(Tensor(base.copy()), colmat)
                if f"bias_{part}_{uk}" in leaves:
                    acc = ad.add(acc, leaves[f"bias_{part}_{uk}"])
                    for c in range(d):
                        col = ad.matmul(leaves[f"w_{part}_{uk}_{c}"], motor)
                        acc = ad.add(acc, ad.matmul(col, self.col_onehots[c]))
                parts.append(acc)
            deltas.append(tuple(parts))
        return deltas

    @staticmethod
    def _project_pairs(pairs, p_max):
        total = None
        for re, im in pairs:
            p = ad.add(ad.tsum(ad.square(re)), ad.tsum(ad.square(im)))
            total = p if total is None else ad.add(total, p)
        if float(total.data) <= p_max:
            return pairs
        scale = ad.exp(ad.mul(Tensor(0.5),
                              ad.log(ad.div(Tensor(p_max), total))))
        return [(ad.mul(re, scale), ad.mul(im, scale)) for re, im in pairs]

    def step(self, h_t, v: PrecoderSet, grad):
        """One online interval: refine the precoder over n_inner
        gradient-feed passes, then take a single Adam step on -R at the
        refined point. Returns (new PrecoderSet, SE at it)."""
        cfg = self.cfg
        tape = ad.Tape()
        bd = self.cell.bind(tape)
        leaves = {n: tape.leaf(p) for n, p in self.map_params.items()}
        self.map_ids = {n: t.node_id for n, t in leaves.items()}
        h_cur = Tensor(self.h_state)
        pairs = [(Tensor(v.v[k].real.copy()), Tensor(v.v[k].imag.copy()))
                 for k in range(v.v.shape[0])]
        # loss rewards every refinement pass, not just the last one, which
        # keeps the learning signal dense; still a single Adam step
        loss_terms = []
        rate = None
        for inner in range(cfg.n_inner):
            if inner == 0:
                g_cur = grad
            else:
                v_cur = np.stack([re.data + 1j * im.data
                                  for re, im in pairs])
                g_cur = se_gradient(
                    h_t, PrecoderSet(v_cur, v.p_max, v.noise))
            v_vals = np.stack([re.data + 1j * im.data for re, im in pairs])
            x = (self.proj @ _glnn_features(g_cur, v_vals))[:, None]
            h_cur = self.cell.step(bd, h_cur, Tensor(x), cfg.dt)
            motor = ad.matmul(self.motor_pick, h_cur)
            deltas = self._increment(leaves, motor, g_cur)
            pairs = [(ad.add(re, dr), ad.add(im, di))
                     for (re, im), (dr, di) in zip(pairs, deltas)]
            pairs = self._project_pairs(pairs, v.p_max)
            rate = rate_graph(h_t, pairs, v.noise)
            loss_terms.append(rate)
        value = float(rate.data)
        if not np.isfinite(value):
            raise RuntimeError("non-finite SE in the online loop")
        total_rate = loss_terms[0]
        for term in loss_terms[1:]:
            total_rate = ad.add(total_rate, term)
        loss = ad.neg(ad.div(total_rate, Tensor(float(len(loss_terms)))))
        grads = ad.backward(loss, tape)
        flat_p = {f"cell.{n}": p for n, p in self.cell.params.items()}
        flat_p.update({f"map.{n}": p for n, p in self.map_params.items()})
        flat_g = {f"cell.{n}": g for n, g in bd.named_grads(grads).items()}
        flat_g.update({f"map.{n}": grads[self.map_ids[n]]
                       for n in self.map_params})
        updated = ad.adam_step(flat_p, flat_g, self.opt)
        self.cell.params = {n: updated[f"cell.{n}"]
                            for n in self.cell.params}
        self.cell.constrain()
        self.map_params = {n: updated[f"map.{n}"] for n in self.map_params}
        self.h_state = h_cur.data
        new_v = np.stack([p[0].data + 1j * p[1].data for p in pairs])
        return PrecoderSet(new_v, v.p_max, v.noise), value


def run_glnn_experiment(sc: BeamformingScenario, cfg: GlnnConfig = None,
                        seed=0,
                        schemes=("glnn", "wmmse", "mrt", "zf")) -> SeTrace:
    """Online loop over the scenario's intervals; baselines are recomputed
    from scratch (or warm-started, for WMMSE) at every step."""
    cfg = cfg or GlnnConfig()
    seq = beamforming_channel_sequence(sc)
    h_all = seq.channels
    n_steps = h_all.shape[0]
    p_max, noise = sc.power_budget, sc.noise_power
    se = {name: np.zeros(n_steps) for name in schemes}

    if "mrt" in schemes or "zf" in schemes:
        for t in range(n_steps):
            for kind in ("mrt", "zf"):
                if kind in schemes:
                    ref = reference_precoders(kind, h_all[t], p_max, noise)
                    se[kind][t] = sum_se(h_all[t], ref)
    if "wmmse" in schemes:
        warm = None
        for t in range(n_steps):
            vw, trace = wmmse_solve(h_all[t], p_max, noise,
                                    max_iters=cfg.wmmse_iters,
                                    tol=cfg.wmmse_tol,
                                    v_init=None if cfg.wmmse_reinit else warm)
            warm = vw
            se["wmmse"][t] = trace[-1]
    if "glnn" in schemes:
        state = _GlnnState(sc, cfg, seed)
        v = PrecoderSet(_mrt_v(h_all[0], p_max), p_max, noise)
        for t in range(n_steps):
            try:
                grad = se_gradient(h_all[t], v)
                v, value = state.step(h_all[t], v, grad)
            except (ValueError, OverflowError, ZeroDivisionError) as exc:
                raise RuntimeError(
                    f"online loop failed at step {t}: {exc}") from exc
            se["glnn"][t] = value
            if not v.budget_ok():
                raise RuntimeError(f"power budget violated at step {t}")
    return SeTrace(se=se, phase_index=seq.phase_index.copy(), seed=seed)


def summarize_trace(trace: SeTrace, tail=300):
    """Per-scheme mean SE per phase and overall, plus whether the online
    scheme overtakes WMMSE before the end of the run."""
    rows = []
    phases = sorted(set(trace.phase_index.tolist()))
    for name, arr in sorted(trace.se.items()):
        row = {"scheme": name, "overall": float(arr.mean())}
        for ph in phases:
            row[f"phase{ph}"] = float(arr[trace.phase_index == ph].mean())
        rows.append(row)
    report = {"rows": rows, "tail": tail}
    if "glnn" in trace.se and "wmmse" in trace.se:
        g = trace.se["glnn"]
        w = trace.se["wmmse"]
        report["tail_ratio"] = float(g[-tail:].mean() / w[-tail:].mean())
        run = np.cumsum(g - w)
        ahead = np.nonzero(run > 0)[0]
        report["surpasses_wmmse"] = bool(g[-tail:].mean() > w[-tail:].mean())
        report["first_lead_step"] = int(ahead[0]) if len(ahead) else -1
    return report
