"""Binary checkpoint format.

Little-endian throughout::

    b"FRDL"  u32 version  u32 tensor_count
    per tensor: u32 name_len, name (UTF-8), u32 rank, u32 dims[rank], f32 data

Tensors are written in dict order.  Values are stored as float32, so a
round trip is bit-exact for float32 parameters.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from frdl.errors import (
    BadMagicError, CheckpointError, ShapeMismatchError, TruncatedCheckpointError,
    VersionMismatchError,
)

MAGIC = b"FRDL"
VERSION = 1


def encode_tensors(tensors: dict[str, np.ndarray]) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"tensor {name} holds non-finite values")
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


def decode_tensors(buf: bytes) -> dict[str, np.ndarray]:
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise TruncatedCheckpointError(f"checkpoint truncated at byte {pos} (wanted {n} more)")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    if take(4) != MAGIC:
        raise BadMagicError("bad magic: not an FRDL checkpoint")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, expected {VERSION}")
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(dims, dtype=np.int64))
        data = np.frombuffer(take(4 * size), dtype="<f4").astype(np.float32)
        tensors[name] = data.reshape(dims)
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes after the last tensor")
    return tensors


def save_checkpoint(params: dict[str, np.ndarray], path, gallery=None) -> None:
    tensors = dict(params)
    if gallery is not None:
        tensors.update(gallery.to_tensors())
    Path(path).write_bytes(encode_tensors(tensors))


def load_checkpoint(path, expected_shapes: dict[str, tuple] | None = None):
    """Return ``(params, gallery_or_None)``.

    With ``expected_shapes`` (see :func:`frdl.net.model.param_shapes`) the
    tensors are validated and the first offending one is named.
    """
    from frdl.classify import Gallery

    tensors = decode_tensors(Path(path).read_bytes())
    gallery = Gallery.from_tensors(tensors)
    params = {k: v for k, v in tensors.items() if not k.startswith("gallery.")}
    if expected_shapes is not None:
        for name, shape in expected_shapes.items():
            if name not in params:
                raise ShapeMismatchError(f"shape mismatch: tensor {name} missing from checkpoint")
            if tuple(params[name].shape) != tuple(shape):
                raise ShapeMismatchError(
                    f"shape mismatch: tensor {name} is {params[name].shape}, config expects {tuple(shape)}"
                )
        extra = [k for k in params if k not in expected_shapes]
        if extra:
            raise ShapeMismatchError(f"shape mismatch: unexpected tensor {extra[0]}")
    return params, gallery
