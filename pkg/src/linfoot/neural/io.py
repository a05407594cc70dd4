"""Binary model files.

Layout (all integers little-endian)::

    b"LINF" | uint32 format_version | uint32 manifest_length | manifest (UTF-8 JSON)
    | float64 parameter blobs | float64 state blobs | packed mask bitmaps
    | sha256 of everything before it (32 bytes)

The manifest lists the architecture and, in order, every blob's owning
layer (index in depth-first layer order), key and shape.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptModelError, UnsupportedVersionError
from .layers import layer_from_spec
from .model import Network

MAGIC = b"LINF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sII")
_DIGEST = 32


def _encode(model: Network, version: int) -> bytes:
    layers = model.walk()
    index = {id(layer): i for i, layer in enumerate(layers)}
    params = [(index[id(l)], k, l.params[k]) for l, k in model.parameters()]
    state = [(index[id(l)], k, l.state[k]) for l, k in model.state_arrays()]
    masks = [(index[id(l)], l.mask) for l in model.dense_layers() if l.mask is not None]
    manifest = {
        "name": model.name,
        "architecture": model.architecture(),
        "params": [{"layer": i, "key": k, "shape": list(a.shape)} for i, k, a in params],
        "state": [{"layer": i, "key": k, "shape": list(a.shape)} for i, k, a in state],
        "masks": [{"layer": i, "shape": list(m.shape)} for i, m in masks],
    }
    text = json.dumps(manifest, sort_keys=True).encode("utf-8")
    chunks = [_HEADER.pack(MAGIC, version, len(text)), text]
    for _, _, a in params + state:
        chunks.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    for _, m in masks:
        chunks.append(np.packbits(m.ravel() != 0).tobytes())
    body = b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def save_model(model: Network, path, *, _version: int = FORMAT_VERSION) -> None:
    Path(path).write_bytes(_encode(model, _version))


def load_model(path) -> Network:
    raw = Path(path).read_bytes()
    return model_from_bytes(raw)


def model_from_bytes(raw: bytes) -> Network:
    if len(raw) < _HEADER.size + _DIGEST:
        raise CorruptModelError("model file is truncated")
    magic, version, mlen = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptModelError("not a model file (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"model format version {version} is not supported (expected {FORMAT_VERSION})")
    body, digest = raw[:-_DIGEST], raw[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptModelError("checksum mismatch (file truncated or modified)")
    try:
        manifest = json.loads(body[_HEADER.size:_HEADER.size + mlen].decode("utf-8"))
        model = Network([layer_from_spec(s) for s in manifest["architecture"]], name=manifest["name"])
        layers = model.walk()
        pos = _HEADER.size + mlen
        for group in ("params", "state"):
            for entry in manifest[group]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape))
                arr = np.frombuffer(body, dtype="<f8", count=count, offset=pos).astype(float).reshape(shape)
                pos += 8 * count
                target = getattr(layers[entry["layer"]], group)
                if entry["key"] not in target or target[entry["key"]].shape != shape:
                    raise CorruptModelError("blob does not match the architecture")
                target[entry["key"]] = arr
        for entry in manifest["masks"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape))
            nbytes = (count + 7) // 8
            bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8, count=nbytes, offset=pos), count=count)
            pos += nbytes
            layer = layers[entry["layer"]]
            layer.mask = bits.reshape(shape).astype(float)
            if np.any(layer.params["W"][layer.mask == 0] != 0):
                raise CorruptModelError("masked weights are not zero")
    except CorruptModelError:
        raise
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise CorruptModelError(f"malformed model file: {exc}") from exc
    if pos != len(body):
        raise CorruptModelError("unexpected trailing bytes in model file")
    return model
