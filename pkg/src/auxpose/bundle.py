"""Binary model bundle: JSON header plus little-endian arrays, closed by a SHA-256 trailer.

Layout::

    b"MPSB" | u32 version | u64 header length | header (UTF-8 JSON) | payload | sha256(all previous bytes)

The header lists every array with its dtype, shape and payload offset. Keys
are sorted and no timestamps are stored, so equal models give equal bytes.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MPSB"
VERSION = 1
_DTYPES = {"f8": "<f8", "i8": "<i8"}


class BundleError(ValueError):
    """A bundle file is malformed or fails its checksum."""


def _canonical(a: np.ndarray) -> tuple:
    a = np.asarray(a)
    if a.dtype.kind in "biu":
        return "i8", np.ascontiguousarray(a, dtype="<i8")
    if a.dtype.kind == "f":
        return "f8", np.ascontiguousarray(a, dtype="<f8")
    raise TypeError(f"unsupported array dtype {a.dtype}")


def encode_bundle(metadata: dict, arrays: dict) -> bytes:
    entries, chunks, offset = {}, [], 0
    for name in sorted(arrays):
        kind, a = _canonical(arrays[name])
        raw = a.tobytes()
        entries[name] = {"dtype": kind, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)}
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"metadata": metadata, "arrays": entries}, sort_keys=True,
                        separators=(",", ":"), allow_nan=False).encode("utf-8")
    body = MAGIC + struct.pack("<IQ", VERSION, len(header)) + header + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def decode_bundle(data: bytes) -> tuple:
    if len(data) < 48 or data[:4] != MAGIC:
        raise BundleError("not a model bundle")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise BundleError("bundle checksum mismatch")
    version, hlen = struct.unpack("<IQ", body[4:16])
    if version != VERSION:
        raise BundleError(f"unsupported bundle version {version}")
    header = json.loads(body[16:16 + hlen].decode("utf-8"))
    payload = memoryview(body)[16 + hlen:]
    arrays = {}
    for name, e in header["arrays"].items():
        if e["offset"] + e["nbytes"] > len(payload):
            raise BundleError(f"array {name!r} runs past the payload")
        chunk = payload[e["offset"]:e["offset"] + e["nbytes"]]
        arrays[name] = np.frombuffer(chunk, dtype=_DTYPES[e["dtype"]]).reshape(e["shape"]).copy()
    return header["metadata"], arrays


def write_bundle(path, metadata: dict, arrays: dict) -> str:
    """Write the bundle; returns its hex checksum."""
    data = encode_bundle(metadata, arrays)
    Path(path).write_bytes(data)
    return data[-32:].hex()


def read_bundle(path) -> tuple:
    return decode_bundle(Path(path).read_bytes())


def bundle_checksum(path) -> str:
    data = Path(path).read_bytes()
    if len(data) < 32:
        raise BundleError("not a model bundle")
    return data[-32:].hex()
