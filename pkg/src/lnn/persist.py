"""Binary persistence: CSI dataset files and model checkpoints.

Both formats are little-endian with fixed magic strings so a wrong file is
rejected immediately instead of producing garbage arrays. All floating data
is 64-bit ('<f8'); complex arrays are stored as interleaved re/im pairs in
row-major element order. Round-trips are bit-exact.

Dataset ("LNNCSI1"): magic, version byte, u64 seed, u32 ndim, u64 dims,
then the complex payload.

Checkpoint ("LNNCKPT1"): magic, version byte, cell kind tag, the three cell
dimensions plus unfold count, an optional wiring block (int8 adjacency
matrices), then each parameter as (name, dims, data) sorted by name. Loading
rebuilds the cell through make_cell and, when a wiring block is present,
recomputes the 0/1 gradient masks from the adjacency; the stored parameters
already carry the signed mask, so they are restored verbatim.
"""

from __future__ import annotations

import struct

import numpy as np

from .cells import LtcCell, make_cell
from .wiring import Wiring, mask_targets

__all__ = ["save_dataset", "load_dataset", "save_checkpoint", "load_checkpoint"]

DATASET_MAGIC = b"LNNCSI1"
CHECKPOINT_MAGIC = b"LNNCKPT1"
_VERSION = 1


class _Reader:
    """Cursor over a byte string with truncation checks."""

    def __init__(self, buf: bytes, label: str):
        self.buf = buf
        self.pos = 0
        self.label = label

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ValueError(f"truncated {self.label} file")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        vals = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return vals[0] if len(vals) == 1 else vals

    def done(self):
        if self.pos != len(self.buf):
            raise ValueError(
                f"{len(self.buf) - self.pos} trailing bytes in {self.label} file")


def _write_array_f8(chunks: list, arr: np.ndarray):
    chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def save_dataset(path, csi: np.ndarray, seed: int = 0):
    """Write a complex CSI array with its generating seed."""
    csi = np.asarray(csi)
    if not np.iscomplexobj(csi):
        raise ValueError("dataset payload must be complex")
    if not np.all(np.isfinite(csi)):
        raise ValueError("dataset payload must be finite")
    chunks = [DATASET_MAGIC, struct.pack("<B", _VERSION),
              struct.pack("<q", int(seed)), struct.pack("<I", csi.ndim)]
    for d in csi.shape:
        chunks.append(struct.pack("<Q", d))
    flat = np.ascontiguousarray(csi, dtype=np.complex128).reshape(-1)
    pairs = np.empty(2 * flat.size)
    pairs[0::2] = flat.real
    pairs[1::2] = flat.imag
    _write_array_f8(chunks, pairs)
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_dataset(path):
    """Read a dataset file; returns (csi complex array, seed)."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read(), "dataset")
    if rd.take(len(DATASET_MAGIC)) != DATASET_MAGIC:
        raise ValueError(f"{path}: not a dataset file (bad magic)")
    version = rd.unpack("<B")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported dataset version {version}")
    seed = rd.unpack("<q")
    ndim = rd.unpack("<I")
    dims = tuple(rd.unpack("<Q") for _ in range(ndim))
    count = 1
    for d in dims:
        count *= d
    pairs = np.frombuffer(rd.take(16 * count), dtype="<f8")
    rd.done()
    csi = (pairs[0::2] + 1j * pairs[1::2]).reshape(dims)
    return csi, seed


def _kind_tag(cell) -> str:
    if isinstance(cell, LtcCell) and cell.solver == "rk4":
        return "ltc-rk4"
    return cell.kind


def save_checkpoint(path, cell, wiring: Wiring | None = None):
    """Write a cell (and its wiring, if sparse) to a checkpoint file."""
    if wiring is not None:
        mask_targets(wiring, cell)  # dimension compatibility check
    elif cell.masks:
        raise ValueError("cell has masks but no wiring was given to save")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<B", _VERSION)]
    tag = _kind_tag(cell).encode()
    chunks.append(struct.pack("<H", len(tag)))
    chunks.append(tag)
    unfolds = cell.unfolds if isinstance(cell, LtcCell) else 0
    chunks.append(struct.pack("<4I", cell.n_inputs, cell.n_units,
                              cell.n_outputs, unfolds))
    if wiring is None:
        chunks.append(struct.pack("<B", 0))
    else:
        chunks.append(struct.pack("<B", 1))
        chunks.append(struct.pack("<4I", wiring.n_sensory, wiring.n_inter,
                                  wiring.n_command, wiring.n_motor))
        chunks.append(np.ascontiguousarray(wiring.sensory_adjacency).tobytes())
        chunks.append(np.ascontiguousarray(wiring.adjacency).tobytes())
    names = sorted(cell.params)
    chunks.append(struct.pack("<I", len(names)))
    for name in names:
        arr = cell.params[name]
        nb = name.encode()
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<B", arr.ndim))
        for d in arr.shape:
            chunks.append(struct.pack("<Q", d))
        _write_array_f8(chunks, arr)
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path):
    """Read a checkpoint; returns (cell, wiring or None).

    Stored parameters were masked at save time, so masks are recomputed from
    the wiring block but never re-applied to the parameter values.
    """
    with open(path, "rb") as fh:
        rd = _Reader(fh.read(), "checkpoint")
    if rd.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    version = rd.unpack("<B")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    tag = rd.take(rd.unpack("<H")).decode()
    n_inputs, n_units, n_outputs, unfolds = rd.unpack("<4I")
    wiring = None
    if rd.unpack("<B"):
        ns, ni, nc, nm = rd.unpack("<4I")
        n_int = ni + nc + nm
        sens = np.frombuffer(rd.take(ns * n_int), dtype=np.int8)
        adj = np.frombuffer(rd.take(n_int * n_int), dtype=np.int8)
        wiring = Wiring(ns, ni, nc, nm,
                        sensory_adjacency=sens.reshape(ns, n_int),
                        adjacency=adj.reshape(n_int, n_int))
    cell = make_cell(tag, n_inputs, n_units, n_outputs,
                     unfolds=max(unfolds, 1))
    stored = {}
    for _ in range(rd.unpack("<I")):
        name = rd.take(rd.unpack("<H")).decode()
        ndim = rd.unpack("<B")
        dims = tuple(rd.unpack("<Q") for _ in range(ndim))
        count = 1
        for d in dims:
            count *= d
        stored[name] = np.frombuffer(rd.take(8 * count),
                                     dtype="<f8").reshape(dims).copy()
    rd.done()
    if set(stored) != set(cell.params):
        raise ValueError(f"{path}: parameter names do not match a {tag} cell")
    for name, arr in stored.items():
        if arr.shape != cell.params[name].shape:
            raise ValueError(f"{path}: shape mismatch for parameter {name}")
        cell.params[name] = arr
    if wiring is not None:
        cell.masks = {name: np.abs(signed)
                      for name, signed in mask_targets(wiring, cell).items()}
    return cell, wiring
