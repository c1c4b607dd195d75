"""Flat binary parameter checkpoints.

Layout: magic "PTNN", version u32, tensor count u32; then per tensor:
name length u32, UTF-8 name, rank u32, dims u32 each, values as
little-endian f64. Round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from .tensor import ParameterSet, Tensor

MAGIC = b"PTNN"
VERSION = 1


def save_params(path: str | Path, params: ParameterSet) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, t in params.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", t.values.ndim))
        chunks.append(struct.pack(f"<{t.values.ndim}I", *t.values.shape))
        chunks.append(np.ascontiguousarray(t.values, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path: str | Path) -> ParameterSet:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: not a PTNN checkpoint")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    params = ParameterSet()
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        dims = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(dims)
        offset += 8 * n
        params.add(name, Tensor(values.astype(np.float64)))
    if offset != len(blob):
        raise DataError(f"{path}: trailing bytes in checkpoint")
    return params
