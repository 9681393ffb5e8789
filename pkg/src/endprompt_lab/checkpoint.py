"""Binary checkpoint format.

Layout, all text in ASCII with ``\\n`` line ends::

    ENDPROMPT-LAB-CKPT 1
    {"config": {...}, "meta": {...}, "tensors": N}      canonical JSON, one line
    <name> <ndim> <d0> <d1> ...                         repeated N times,
    <raw bytes: prod(shape) float64, little-endian, row-major>

Canonical JSON means sorted keys and ``(",", ":")`` separators, so a given
model and metadata always serialize to the same bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .model import ModelConfig, Params, param_shapes

MAGIC = b"ENDPROMPT-LAB-CKPT 1\n"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps(cfg: ModelConfig, params: Params, meta: dict | None = None) -> bytes:
    expected = param_shapes(cfg)
    if list(params) != list(expected):
        raise ValueError("parameter names do not match the model config")
    header = {"config": cfg.to_dict(), "meta": meta or {}, "tensors": len(params)}
    parts = [MAGIC, canonical_json(header).encode() + b"\n"]
    for name, arr in params.items():
        if arr.shape != expected[name]:
            raise ValueError(f"{name}: shape {arr.shape} != {expected[name]}")
        dims = " ".join(str(d) for d in arr.shape)
        parts.append(f"{name} {arr.ndim} {dims}\n".encode())
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> tuple[ModelConfig, Params, dict]:
    if not blob.startswith(MAGIC):
        raise ParseError(1, "not a checkpoint (bad magic line)")
    pos = len(MAGIC)

    def line(lineno: int) -> str:
        nonlocal pos
        end = blob.find(b"\n", pos)
        if end < 0:
            raise ParseError(lineno, "truncated checkpoint")
        text = blob[pos:end].decode("ascii")
        pos = end + 1
        return text

    try:
        header = json.loads(line(2))
        cfg = ModelConfig(**header["config"])
        count = int(header["tensors"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(2, f"bad header: {exc}") from exc
    params: Params = {}
    for i in range(count):
        fields = line(3 + i).split()
        try:
            name, ndim = fields[0], int(fields[1])
            shape = tuple(int(d) for d in fields[2 : 2 + ndim])
        except (IndexError, ValueError) as exc:
            raise ParseError(3 + i, f"bad tensor record: {exc}") from exc
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(blob):
            raise ParseError(3 + i, f"tensor {name} is truncated")
        params[name] = np.frombuffer(blob, dtype="<f8", count=nbytes // 8, offset=pos).reshape(shape).astype(np.float64)
        pos += nbytes
    if pos != len(blob):
        raise ParseError(3 + count, "trailing bytes after the last tensor")
    expected = param_shapes(cfg)
    if {k: v.shape for k, v in params.items()} != expected:
        raise ParseError(2, "tensors do not match the config")
    return cfg, params, header["meta"]


def save(path, cfg: ModelConfig, params: Params, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps(cfg, params, meta))


def load(path) -> tuple[ModelConfig, Params, dict]:
    return loads(Path(path).read_bytes())
