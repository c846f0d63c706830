"""HKVH snapshot binary format.

Layout, all little-endian:

    bytes 0..3   magic 'HKVH'
    u32          version (= 1)
    u32          mode: 0 continuum, 1 finite-dim
    u32          rank
    u32 x rank   dims, slowest axis first (quantum axis fastest)
    f64 pairs    interleaved (re, im), C order

Real-valued fields are stored with zero imaginary parts.  The reader
validates magic, version, and the payload length against the header and
reports the offending byte offset.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HKVH"
VERSION = 1


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(path, array: np.ndarray, mode: int) -> None:
    a = np.ascontiguousarray(np.asarray(array, dtype=complex))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, int(mode), a.ndim))
        fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
        inter = np.empty(a.shape + (2,), dtype="<f8")
        inter[..., 0] = a.real
        inter[..., 1] = a.imag
        fh.write(inter.tobytes())


def read_snapshot(path):
    """Returns (array, mode)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise SnapshotFormatError(f"file too short ({len(data)} bytes) for a header")
    if data[:4] != MAGIC:
        raise SnapshotFormatError(f"bad magic {data[:4]!r} at byte offset 0")
    version, mode, rank = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported version {version} at byte offset 4")
    if mode not in (0, 1):
        raise SnapshotFormatError(f"invalid mode {mode} at byte offset 8")
    if rank == 0 or rank > 8:
        raise SnapshotFormatError(f"implausible rank {rank} at byte offset 12")
    off = 16
    if len(data) < off + 4 * rank:
        raise SnapshotFormatError(f"truncated dims at byte offset {off}")
    dims = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    count = int(np.prod(dims))
    expected = off + 16 * count
    if len(data) != expected:
        raise SnapshotFormatError(
            f"payload length mismatch at byte offset {off}: have {len(data) - off} "
            f"bytes, header implies {16 * count}")
    flat = np.frombuffer(data, dtype="<f8", count=2 * count, offset=off)
    arr = (flat[0::2] + 1j * flat[1::2]).reshape(dims)
    return arr, mode
