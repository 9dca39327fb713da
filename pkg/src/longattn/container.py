"""Deterministic binary container: a JSON metadata block plus named arrays.

Layout (all integers little-endian):

    magic   8 bytes   b"LATNBIN1"
    u32     metadata length in bytes
    bytes   metadata: canonical JSON (sorted keys, compact separators), UTF-8
    u32     number of arrays
    per array:
        u16     name length, then the UTF-8 name
        u8      dtype code: 0 = float64, 1 = int64
        u32     rows
        u32     cols
        bytes   rows*cols values, little-endian, row-major

Identical inputs produce identical bytes, which is what the reproducibility
contract for checkpoints and datasets rests on.
"""

from __future__ import annotations

import json
import struct
from typing import Iterable

import numpy as np

from .errors import ConfigError

MAGIC = b"LATNBIN1"

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}
_CODES = {np.dtype("float64"): 0, np.dtype("int64"): 1}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_container(path, meta: dict, arrays: Iterable[tuple[str, np.ndarray]]) -> None:
    arrays = list(arrays)
    meta_bytes = canonical_json(meta).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays:
            arr = np.ascontiguousarray(arr)
            if arr.ndim != 2:
                raise ConfigError(f"container arrays are 2-D, {name!r} has shape {arr.shape}")
            code = _CODES.get(arr.dtype)
            if code is None:
                raise ConfigError(f"unsupported dtype {arr.dtype} for array {name!r}")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<BII", code, arr.shape[0], arr.shape[1]))
            fh.write(arr.astype(_DTYPES[code], copy=False).tobytes())


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ConfigError(f"{path}: not a longattn container (bad magic)")
        (meta_len,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        (n_arrays,) = struct.unpack("<I", fh.read(4))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(n_arrays):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            code, rows, cols = struct.unpack("<BII", fh.read(9))
            if code not in _DTYPES:
                raise ConfigError(f"{path}: unknown dtype code {code} for {name!r}")
            dtype = _DTYPES[code]
            raw = fh.read(rows * cols * dtype.itemsize)
            arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(rows, cols).copy()
    return meta, arrays
