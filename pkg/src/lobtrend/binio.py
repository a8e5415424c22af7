"""Byte-stable binary container: JSON header + raw little-endian array blobs.

Used for feature files and model checkpoints. Unlike zip-based containers
there are no timestamps or compression headers, so identical content
always serializes to identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"LOBTREND\x00"
FORMAT_VERSION = 1


class ContainerError(ValueError):
    pass


def _canonical_dtype(arr: np.ndarray) -> str:
    dt = arr.dtype.newbyteorder("<")
    return dt.str


def write_container(path: str | Path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write ``arrays`` plus a JSON ``meta`` block. Array order follows dict order."""
    entries = []
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        blob = arr.tobytes()
        entries.append({
            "name": name,
            "dtype": _canonical_dtype(arr),
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {"version": FORMAT_VERSION, "meta": meta, "arrays": entries},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ContainerError(f"{path}: not a lobtrend container")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("version") != FORMAT_VERSION:
            raise ContainerError(
                f"{path}: unsupported container version {header.get('version')}")
        payload = fh.read()
    arrays = {}
    for entry in header["arrays"]:
        start = entry["offset"]
        stop = start + entry["nbytes"]
        arr = np.frombuffer(payload[start:stop], dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return header["meta"], arrays
