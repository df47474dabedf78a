"""Binary model serialization: "ECGM" magic, layer records, CRC32 trailer."""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .nn.layers import Layer
from .nn.model import Model, canonical_layers, layer_hyper, make_layer

MAGIC = b"ECGM"
VERSION = 1

KIND_IDS = {"conv1d": 1, "relu": 2, "maxpool1d": 3, "dropout": 4,
            "lstm": 5, "dense": 6, "softmax": 7}
KIND_NAMES = {v: k for k, v in KIND_IDS.items()}


class StoreError(Exception):
    pass


class BadMagicError(StoreError):
    pass


class UnsupportedVersionError(StoreError):
    pass


class ChecksumMismatchError(StoreError):
    pass


class TruncatedFileError(StoreError):
    pass


def _hyper_words(kind: str, hyper: dict) -> list[int]:
    """Encode hyperparameters as u32 words; float rates in exact micro-units."""
    if kind == "conv1d":
        return [hyper["out_channels"], hyper["in_channels"], hyper["kernel"]]
    if kind == "maxpool1d":
        return [hyper["pool"], hyper["stride"]]
    if kind == "dropout":
        return [int(round(hyper["rate"] * 1_000_000))]
    if kind == "lstm":
        return [hyper["in_features"], hyper["hidden"]]
    if kind == "dense":
        return [hyper["out_features"], hyper["in_features"], int(hyper["relu"])]
    return []


def _hyper_from_words(kind: str, words: list[int]) -> dict:
    if kind == "conv1d":
        o, c, k = words
        return {"in_channels": c, "out_channels": o, "kernel": k}
    if kind == "maxpool1d":
        p, s = words
        return {"pool": p, "stride": s}
    if kind == "dropout":
        return {"rate": words[0] / 1_000_000}
    if kind == "lstm":
        f, h = words
        return {"in_features": f, "hidden": h}
    if kind == "dense":
        o, i, r = words
        return {"in_features": i, "out_features": o, "relu": bool(r)}
    return {}


def save(model: Model, path: str | Path) -> int:
    """Write the model (parameters as little-endian f32) and return the byte count.

    Optimizer state is never stored; loading yields an inference-ready model.
    """
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(model.layers))]
    for layer in model.layers:
        kind = layer.kind
        if kind not in KIND_IDS:
            raise StoreError(f"cannot serialize layer kind {kind!r}")
        words = _hyper_words(kind, layer_hyper(layer))
        chunks.append(struct.pack("<II", KIND_IDS[kind], len(words)))
        chunks.append(struct.pack(f"<{len(words)}I", *words) if words else b"")
        tensors = list(layer.params.values())
        chunks.append(struct.pack("<I", len(tensors)))
        for tensor in tensors:
            dims = tensor.shape
            chunks.append(struct.pack(f"<I{len(dims)}I", len(dims), *dims))
            chunks.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    body = b"".join(chunks)
    payload = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    Path(path).write_bytes(payload)
    return len(payload)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError("unexpected end of file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load(path: str | Path) -> Model:
    """Read a model file, verifying magic, version, structure, stack, and checksum."""
    data = Path(path).read_bytes()
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise BadMagicError(f"bad magic in {path}: expected {MAGIC!r}")
    version = reader.u32()
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported model file version {version}")

    n_layers = reader.u32()
    layers: list[Layer] = []
    for _ in range(n_layers):
        kind_id = reader.u32()
        if kind_id not in KIND_NAMES:
            raise StoreError(f"unknown layer kind id {kind_id}")
        kind = KIND_NAMES[kind_id]
        n_words = reader.u32()
        words = list(struct.unpack(f"<{n_words}I", reader.take(4 * n_words)))
        layer = make_layer(kind, _hyper_from_words(kind, words),
                           rng=np.random.default_rng(0), dtype=np.float32)
        n_tensors = reader.u32()
        names = list(layer.params)
        if n_tensors != len(names):
            raise StoreError(f"{kind}: expected {len(names)} tensors, found {n_tensors}")
        for name in names:
            ndim = reader.u32()
            dims = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
            count = int(np.prod(dims)) if dims else 1
            expected = layer.params[name].shape
            if tuple(dims) != expected:
                raise StoreError(f"{kind}.{name}: stored shape {dims} != {expected}")
            raw = reader.take(4 * count)
            layer.params[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
        layers.append(layer)

    stored_crc = reader.u32()
    if reader.pos != len(data):
        raise StoreError(f"{len(data) - reader.pos} trailing bytes after checksum")
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumMismatchError("checksum mismatch")

    described = [(layer.kind, layer_hyper(layer)) for layer in layers]
    if described != canonical_layers():
        raise StoreError("layer stack does not match the supported architecture")
    return Model(layers)
