"""Binary container for trained models (dictionary, PCA, Gaussian).

Layout (little-endian): magic ``SPMD``, u32 version, u32 kind, u32 D,
u32 cols, u32 kappa, u32 reserved, u64 checksum (first 8 bytes of the
payload's SHA-256), then the float64 payload blocks. A human-readable JSON
sidecar sits next to the file at ``<path>.meta.json``.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MODEL_MAGIC = b"SPMD"
MODEL_VERSION = 1

KIND_DICTIONARY = 1
KIND_PCA = 2
KIND_GAUSSIAN = 3

_HEADER = struct.Struct("<4sIIIIIIQ")


def write_model(path: str | Path, *, kind: int, dim: int, cols: int, kappa: int,
                blocks: list[np.ndarray], meta: dict | None = None):
    path = Path(path)
    payload = b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blocks)
    checksum = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    header = _HEADER.pack(MODEL_MAGIC, MODEL_VERSION, kind, dim, cols, kappa, 0, checksum)
    path.write_bytes(header + payload)
    if meta is not None:
        sidecar = {"kind": kind, "dim": dim, "cols": cols, "kappa": kappa, **meta}
        Path(str(path) + ".meta.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_model(path: str | Path):
    """Returns (kind, dim, cols, kappa, flat_float64_payload)."""
    path = Path(path)
    if not path.exists():
        raise FormatError("no such model file", path=str(path))
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("model file shorter than its header", path=str(path))
    magic, version, kind, dim, cols, kappa, _, checksum = _HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise FormatError("bad magic; not a model container", path=str(path))
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported container version {version}", path=str(path))
    payload = data[_HEADER.size:]
    actual = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    if actual != checksum:
        raise FormatError("payload checksum mismatch", path=str(path))
    return kind, dim, cols, kappa, np.frombuffer(payload, dtype="<f8").astype(float)
