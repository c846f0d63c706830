"""Readers for the solver's on-disk artifacts.

This package never recomputes physics: it parses the documented formats
and draws.  The snapshot layout (all little-endian):

    bytes 0..3   magic 'HKVH'
    u32          version (= 1)
    u32          mode: 0 continuum, 1 finite-dim
    u32          rank
    u32 x rank   dims, quantum axis fastest
    f64 pairs    interleaved (re, im), C order

Every header field is validated against the payload length and format
errors carry the offending byte offset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"HKVH"
VERSION = 1


class FormatError(ValueError):
    pass


@dataclass
class Snapshot:
    data: np.ndarray
    mode: int  # 0 continuum, 1 finite-dim

    @property
    def rank(self) -> int:
        return self.data.ndim


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r} at byte offset 0")
    version, mode, rank = struct.unpack_from("<III", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte offset 4")
    if mode not in (0, 1):
        raise FormatError(f"{path}: invalid mode {mode} at byte offset 8")
    if not 1 <= rank <= 8:
        raise FormatError(f"{path}: implausible rank {rank} at byte offset 12")
    off = 16
    if len(raw) < off + 4 * rank:
        raise FormatError(f"{path}: truncated dims at byte offset {off}")
    dims = struct.unpack_from(f"<{rank}I", raw, off)
    off += 4 * rank
    count = int(np.prod(dims))
    if len(raw) != off + 16 * count:
        raise FormatError(
            f"{path}: payload length mismatch at byte offset {off}: "
            f"{len(raw) - off} bytes for dims {dims} (need {16 * count})")
    flat = np.frombuffer(raw, dtype="<f8", count=2 * count, offset=off)
    return Snapshot((flat[0::2] + 1j * flat[1::2]).reshape(dims), mode)


def read_table(path) -> dict:
    """Comma-separated diagnostics with a header row; returns a dict of
    float columns in file order."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) < 2 or any(not h for h in header):
        raise FormatError(f"{path}: malformed header row {lines[0]!r}")
    cols = {h: [] for h in header}
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(header):
            raise FormatError(f"{path}: line {lineno} has {len(parts)} fields, "
                              f"header has {len(header)}")
        for h, tok in zip(header, parts):
            try:
                cols[h].append(float(tok))
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: {tok!r} is not a number")
    return {h: np.asarray(v) for h, v in cols.items()}
