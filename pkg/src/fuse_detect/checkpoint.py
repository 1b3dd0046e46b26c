"""Versioned binary checkpoint container.

Layout (all little-endian):

    magic "FUSE" | u16 version | 32-byte config hash (sha256) |
    u32 config-json length | config json (utf-8, canonical) |
    u32 spectral length | float32 mean[L] | float32 std[L] |
    u32 array count | per array: u8 name length, name, u8 ndim,
        u32 dims..., float32 data (C order) |
    u32 crc32 over everything above

The config hash covers the feature-extraction configuration (reduction mode,
degradation parameters, encoder identity) so a checkpoint cannot silently be
used under a different feature setup.
"""
import hashlib
import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from fuse_detect.errors import ConfigHashMismatch, CorruptCheckpoint, VersionMismatch
from fuse_detect.fusion import FusionNormalizer, MlpParams

MAGIC = b"FUSE"
FORMAT_VERSION = 1


def config_hash(feature_config: dict) -> bytes:
    """sha256 of the canonical JSON form of the feature configuration."""
    blob = json.dumps(feature_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).digest()


@dataclass
class Checkpoint:
    params: MlpParams
    normalizer: FusionNormalizer
    feature_config: dict

    @property
    def hash(self) -> bytes:
        return config_hash(self.feature_config)


def _pack_array(name: str, arr: np.ndarray) -> bytes:
    data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    head = struct.pack("<B", len(name)) + name.encode("ascii")
    head += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + data


def serialize(ckpt: Checkpoint) -> bytes:
    cfg_blob = json.dumps(
        ckpt.feature_config, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    out += ckpt.hash
    out += struct.pack("<I", len(cfg_blob)) + cfg_blob
    mean = np.ascontiguousarray(ckpt.normalizer.mean, dtype="<f4")
    std = np.ascontiguousarray(ckpt.normalizer.std, dtype="<f4")
    out += struct.pack("<I", mean.size) + mean.tobytes() + std.tobytes()
    arrays = ckpt.params.arrays()
    out += struct.pack("<I", len(arrays))
    for name, arr in arrays:
        out += _pack_array(name, arr)
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpoint("checkpoint file is truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def deserialize(data: bytes) -> Checkpoint:
    rd = _Reader(data)
    if rd.take(4) != MAGIC:
        raise CorruptCheckpoint("bad magic bytes")
    version = rd.u16()
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported checkpoint version {version}")
    stored_hash = rd.take(32)
    cfg_blob = rd.take(rd.u32())
    try:
        feature_config = json.loads(cfg_blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"unreadable config block: {exc}") from exc
    n = rd.u32()
    mean = np.frombuffer(rd.take(4 * n), dtype="<f4").astype(np.float64)
    std = np.frombuffer(rd.take(4 * n), dtype="<f4").astype(np.float64)
    count = rd.u32()
    arrays = {}
    for _ in range(count):
        name = rd.take(rd.u8()).decode("ascii")
        ndim = rd.u8()
        shape = struct.unpack(f"<{ndim}I", rd.take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(rd.take(4 * size), dtype="<f4").reshape(shape).copy()
    crc = rd.u32()
    if rd.pos != len(data):
        raise CorruptCheckpoint("trailing bytes after checkpoint payload")
    if crc != zlib.crc32(data[: len(data) - 4]):
        raise CorruptCheckpoint("checksum mismatch")
    missing = {"w1", "b1", "w2", "b2"} - arrays.keys()
    if missing:
        raise CorruptCheckpoint(f"missing parameter arrays: {sorted(missing)}")
    ckpt = Checkpoint(
        params=MlpParams(arrays["w1"], arrays["b1"], arrays["w2"], arrays["b2"]),
        normalizer=FusionNormalizer(mean=mean, std=std),
        feature_config=feature_config,
    )
    if ckpt.hash != stored_hash:
        raise CorruptCheckpoint("stored config hash does not match config block")
    return ckpt


def save_checkpoint(path, params: MlpParams, normalizer: FusionNormalizer, feature_config: dict) -> None:
    blob = serialize(Checkpoint(params, normalizer, feature_config))
    with open(path, "wb") as fh:
        fh.write(blob)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def ensure_config_hash(ckpt: Checkpoint, live_feature_config: dict) -> None:
    """Raise if a checkpoint was produced under a different feature config."""
    if config_hash(live_feature_config) != ckpt.hash:
        raise ConfigHashMismatch(
            "live feature configuration differs from the checkpoint's "
            f"(checkpoint: {ckpt.feature_config})"
        )
