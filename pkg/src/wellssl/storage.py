"""Binary tensor container used for checkpoints and interval files.

Layout (all integers little-endian)::

    8 bytes   magic  b"WSSLTNSR"
    4 bytes   uint32 format version (currently 1)
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header, keys sorted, no whitespace:
              {"meta": {...}, "tensors": [{"name", "dtype", "shape", "offset", "nbytes"}, ...]}
    ...       raw tensor payloads in header order, C order, dtype "<f8" or "<i8"

Offsets are relative to the first payload byte. Nothing time- or
host-dependent is written, so equal inputs give byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"WSSLTNSR"
VERSION = 1
_DTYPES = {"f8": np.dtype("<f8"), "i8": np.dtype("<i8")}


class FormatError(ValueError):
    pass


def _code(arr: np.ndarray) -> str:
    if arr.dtype.kind == "f":
        return "f8"
    if arr.dtype.kind in "iub":
        return "i8"
    raise FormatError(f"unsupported dtype {arr.dtype}")


def save_tensors(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries, payloads, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        code = _code(arr)
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        entries.append(
            {"name": name, "dtype": code, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"meta": meta or {}, "tensors": entries}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(header)
        for raw in payloads:
            fh.write(raw)


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: not a tensor container")
    version, hlen = struct.unpack_from("<IQ", data, 8)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported container version {version}")
    start = 8 + 12
    header = json.loads(data[start : start + hlen].decode("utf-8"))
    base = start + hlen
    out = {}
    for e in header["tensors"]:
        lo = base + e["offset"]
        buf = data[lo : lo + e["nbytes"]]
        if len(buf) != e["nbytes"]:
            raise FormatError(f"{path}: truncated tensor {e['name']!r}")
        out[e["name"]] = np.frombuffer(buf, dtype=_DTYPES[e["dtype"]]).reshape(e["shape"]).copy()
    return out, header["meta"]
