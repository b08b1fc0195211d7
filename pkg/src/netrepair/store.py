"""AIRMODEL file format.

Layout (all integers little-endian)::

    8 bytes   magic  b"AIRMODEL"
    u32       format version (1)
    u64       header length in bytes
    ...       UTF-8 JSON header: arch, layers, tensor index, metadata, blob CRC32
    ...       tensor blob, little-endian float32, tensors back to back
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .model import LayerSpec, Model

MAGIC = b"AIRMODEL"
VERSION = 1
_PREFIX = struct.Struct("<IQ")


class ModelFormatError(ValueError):
    pass


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedFileError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


def model_to_bytes(model: Model) -> bytes:
    model.validate()
    index, chunks, offset = [], [], 0
    for name, w in model.weights.items():
        raw = np.ascontiguousarray(w, dtype="<f4").tobytes()
        index.append({"name": name, "shape": list(w.shape), "offset": offset, "length": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    header = {
        "arch_name": model.arch_name,
        "depth": model.depth,
        "input_shape": list(model.input_shape),
        "num_classes": model.num_classes,
        "layers": [l.to_dict() for l in model.layers],
        "tensors": index,
        "metadata": model.metadata,
        "blob_length": len(blob),
        "crc32": zlib.crc32(blob),
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + _PREFIX.pack(VERSION, len(hb)) + hb + blob


def model_from_bytes(raw: bytes, source: str = "<bytes>") -> Model:
    if raw[:8] != MAGIC:
        raise BadMagicError(f"{source}: not an AIRMODEL file")
    if len(raw) < 8 + _PREFIX.size:
        raise TruncatedFileError(f"{source}: truncated header")
    version, hlen = _PREFIX.unpack_from(raw, 8)
    if version != VERSION:
        raise VersionMismatchError(f"{source}: format version {version}, this reader supports {VERSION}")
    start = 8 + _PREFIX.size
    if len(raw) < start + hlen:
        raise TruncatedFileError(f"{source}: truncated header")
    try:
        header = json.loads(raw[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{source}: corrupt header ({exc})") from exc
    blob = raw[start + hlen:]
    if len(blob) < header["blob_length"]:
        raise TruncatedFileError(f"{source}: tensor blob has {len(blob)} of {header['blob_length']} bytes")
    if len(blob) > header["blob_length"]:
        raise ModelFormatError(f"{source}: {len(blob) - header['blob_length']} trailing bytes")
    if zlib.crc32(blob) != header["crc32"]:
        raise ChecksumError(f"{source}: tensor blob checksum mismatch")
    weights = {}
    for t in header["tensors"]:
        arr = np.frombuffer(blob, dtype="<f4", count=t["length"] // 4, offset=t["offset"])
        weights[t["name"]] = arr.reshape(t["shape"]).astype(np.float32)
    return Model(header["arch_name"], header["depth"], tuple(header["input_shape"]), header["num_classes"],
                 [LayerSpec.from_dict(d) for d in header["layers"]], weights, header["metadata"])


def save_model(model: Model, path) -> Path:
    """Write atomically: a temporary sibling file is renamed into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "wb") as f:
        f.write(model_to_bytes(model))
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    return path


def load_model(path) -> Model:
    path = Path(path)
    return model_from_bytes(path.read_bytes(), str(path))


def model_digest(model: Model) -> str:
    """Short content hash of the serialized model."""
    import hashlib

    return hashlib.sha256(model_to_bytes(model)).hexdigest()[:16]
