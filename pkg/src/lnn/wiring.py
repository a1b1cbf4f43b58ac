"""Four-layer NCP wiring: sensory -> inter -> command -> motor.

A Wiring holds two signed int8 adjacency matrices in the style of the NCP
literature: sensory_adjacency (n_sensory x n_internal) and adjacency
(n_internal x n_internal), where the internal neurons are ordered
[inter | command | motor]. Entry [src, dst] is +1/-1 for an
excitatory/inhibitory synapse, 0 for none. Only four blocks may be nonzero:
sensory->inter, inter->command, command->command, command->motor.

build_wiring draws fanouts without replacement, repairs orphans, and is a
pure function of its config (seed included). apply_masks turns a wiring into
multiplicative weight masks on a cell; masked entries are exactly zero and
stay zero through training because the 0/1 mask also multiplies the
parameter leaf inside every forward graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import CfcCell, LtcCell

__all__ = ["WiringConfig", "Wiring", "build_wiring", "validate_wiring",
           "apply_masks", "mask_targets", "default_wiring_config"]


@dataclass(frozen=True)
class WiringConfig:
    n_sensory: int
    n_inter: int = 16
    n_command: int = 10
    n_motor: int = 4
    fanout_sensory: int = 4
    fanout_inter: int = 4
    fanin_motor: int = 4
    n_command_recurrent: int = 20
    seed: int = 0

    def validate(self):
        for name in ("n_sensory", "n_inter", "n_command", "n_motor",
                     "fanout_sensory", "fanout_inter", "fanin_motor",
                     "n_command_recurrent"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.fanout_sensory > self.n_inter:
            raise ValueError("fanout_sensory exceeds n_inter")
        if self.fanout_inter > self.n_command:
            raise ValueError("fanout_inter exceeds n_command")
        if self.fanin_motor > self.n_command:
            raise ValueError("fanin_motor exceeds n_command")
        if self.n_command_recurrent > self.n_command * self.n_command:
            raise ValueError("n_command_recurrent exceeds command pair count")


class Wiring:
    """Immutable after construction; see module docstring for layout."""

    def __init__(self, n_sensory, n_inter, n_command, n_motor,
                 sensory_adjacency=None, adjacency=None):
        self.n_sensory = n_sensory
        self.n_inter = n_inter
        self.n_command = n_command
        self.n_motor = n_motor
        n_int = n_inter + n_command + n_motor
        self.sensory_adjacency = (np.zeros((n_sensory, n_int), dtype=np.int8)
                                  if sensory_adjacency is None
                                  else np.asarray(sensory_adjacency, dtype=np.int8))
        self.adjacency = (np.zeros((n_int, n_int), dtype=np.int8)
                          if adjacency is None
                          else np.asarray(adjacency, dtype=np.int8))
        if self.sensory_adjacency.shape != (n_sensory, n_int):
            raise ValueError("sensory_adjacency shape mismatch")
        if self.adjacency.shape != (n_int, n_int):
            raise ValueError("adjacency shape mismatch")

    @property
    def n_internal(self):
        return self.n_inter + self.n_command + self.n_motor

    # column/row spans of each internal layer
    @property
    def inter_slice(self):
        return slice(0, self.n_inter)

    @property
    def command_slice(self):
        return slice(self.n_inter, self.n_inter + self.n_command)

    @property
    def motor_slice(self):
        return slice(self.n_inter + self.n_command, self.n_internal)

    def density(self):
        """Nonzero fraction of the internal (recurrent) adjacency."""
        return float(np.count_nonzero(self.adjacency)) / self.adjacency.size


def _polarity(rng):
    return np.int8(1) if rng.integers(0, 2) == 1 else np.int8(-1)


def build_wiring(cfg: WiringConfig) -> Wiring:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    w = Wiring(cfg.n_sensory, cfg.n_inter, cfg.n_command, cfg.n_motor)
    ci = cfg.n_inter           # first command index
    cm = ci + cfg.n_command    # first motor index

    # sensory -> inter, fanout without replacement
    for s in range(cfg.n_sensory):
        for dst in rng.choice(cfg.n_inter, size=cfg.fanout_sensory, replace=False):
            w.sensory_adjacency[s, dst] = _polarity(rng)
    for i in range(cfg.n_inter):  # repair inters nothing reaches
        if not np.any(w.sensory_adjacency[:, i]):
            w.sensory_adjacency[rng.integers(cfg.n_sensory), i] = _polarity(rng)

    # inter -> command
    for i in range(cfg.n_inter):
        for dst in rng.choice(cfg.n_command, size=cfg.fanout_inter, replace=False):
            w.adjacency[i, ci + dst] = _polarity(rng)
    for c in range(cfg.n_command):  # repair commands with no inter input
        if not np.any(w.adjacency[:ci, ci + c]):
            w.adjacency[rng.integers(cfg.n_inter), ci + c] = _polarity(rng)

    # command -> command, distinct ordered pairs so the count is exact
    pairs = rng.choice(cfg.n_command * cfg.n_command,
                       size=cfg.n_command_recurrent, replace=False)
    for p in pairs:
        src, dst = divmod(int(p), cfg.n_command)
        w.adjacency[ci + src, ci + dst] = _polarity(rng)

    # command -> motor, fanin per motor
    for m in range(cfg.n_motor):
        for src in rng.choice(cfg.n_command, size=cfg.fanin_motor, replace=False):
            w.adjacency[ci + src, cm + m] = _polarity(rng)
    for c in range(cfg.n_command):  # repair commands with no outgoing synapse
        if not np.any(w.adjacency[ci + c, ci:]):
            w.adjacency[ci + c, cm + rng.integers(cfg.n_motor)] = _polarity(rng)

    return w


def validate_wiring(w: Wiring) -> list[str]:
    """Block structure, motor reachability, stranded neurons. Empty = valid."""
    violations = []
    isl, csl, msl = w.inter_slice, w.command_slice, w.motor_slice

    def block_check(mat, rows, bad_cols, src_name, dst_name):
        sub = mat[rows, bad_cols]
        for r, c in zip(*np.nonzero(sub)):
            violations.append(
                f"block: {src_name} {r} -> {dst_name} {c} not allowed")

    block_check(w.sensory_adjacency, slice(None), csl, "sensory", "command")
    block_check(w.sensory_adjacency, slice(None), msl, "sensory", "motor")
    block_check(w.adjacency, isl, isl, "inter", "inter")
    block_check(w.adjacency, isl, msl, "inter", "motor")
    block_check(w.adjacency, csl, isl, "command", "inter")
    block_check(w.adjacency, msl, slice(None), "motor", "internal")

    # stranded neurons (motor coverage comes from reachability below)
    for s in range(w.n_sensory):
        if not np.any(w.sensory_adjacency[s]):
            violations.append(f"sensory {s} has no outgoing synapse")
    for i in range(w.n_inter):
        if not np.any(w.sensory_adjacency[:, i]):
            violations.append(f"inter {i} has no incoming synapse")
        if not np.any(w.adjacency[i]):
            violations.append(f"inter {i} has no outgoing synapse")
    for c in range(w.n_command):
        row = w.command_slice.start + c
        if not np.any(w.adjacency[:, row]):
            violations.append(f"command {c} has no incoming synapse")
        if not np.any(w.adjacency[row]):
            violations.append(f"command {c} has no outgoing synapse")

    # motor reachability by forward sweep from the sensory layer
    reach = np.any(w.sensory_adjacency != 0, axis=0)
    hops = (w.adjacency != 0).astype(np.int64)
    for _ in range(w.n_internal):
        new = reach | (reach.astype(np.int64) @ hops > 0)
        if np.array_equal(new, reach):
            break
        reach = new
    for m in range(w.n_motor):
        if not reach[w.motor_slice.start + m]:
            violations.append(f"motor {m} unreachable from sensory layer")

    return violations


def _masks_from(w: Wiring):
    # weight convention: W[dst, src], adjacency convention: adj[src, dst]
    rec_signed = w.adjacency.T.astype(np.float64)
    in_signed = w.sensory_adjacency.T.astype(np.float64)
    return rec_signed, in_signed


def mask_targets(w: Wiring, cell) -> dict:
    """Signed mask per maskable parameter name for this cell kind."""
    if cell.n_units != w.n_internal:
        raise ValueError(
            f"cell has {cell.n_units} units, wiring has {w.n_internal}")
    if cell.n_inputs != w.n_sensory:
        raise ValueError(
            f"cell takes {cell.n_inputs} inputs, wiring has {w.n_sensory} sensory")
    rec_signed, in_signed = _masks_from(w)
    if isinstance(cell, LtcCell):
        return {"W_rec": rec_signed, "W_in": in_signed}
    if isinstance(cell, CfcCell):
        targets = {}
        eye = np.eye(cell.n_units)
        for br in cell.BRANCHES:
            targets[f"Wh_{br}"] = rec_signed
            targets[f"Wx_{br}"] = in_signed
            # one hidden unit per neuron: keep the mixing layer neuron-local
            targets[f"W2_{br}"] = eye
        return targets
    raise ValueError(f"cannot wire a {type(cell).__name__}")


def apply_masks(w: Wiring, cell):
    """Mask a cell's recurrent/input weights in place and return the cell.

    The signed mask multiplies the stored parameters once (polarity applied,
    zeros zeroed); the 0/1 magnitude mask is remembered on the cell and
    multiplies the parameter leaf inside every forward graph, which makes
    masked gradients identically zero.
    """
    for name, signed in mask_targets(w, cell).items():
        cell.params[name] = cell.params[name] * signed
        cell.masks[name] = np.abs(signed)
    return cell


def default_wiring_config(n_sensory, seed=0) -> WiringConfig:
    """The 30-unit default: 16 inter + 10 command + 4 motor."""
    return WiringConfig(n_sensory=n_sensory, seed=seed)
