"""Checkpoint container: round trips, integrity checks, config binding."""
import numpy as np
import pytest

from fuse_detect.checkpoint import (
    Checkpoint,
    deserialize,
    ensure_config_hash,
    load_checkpoint,
    save_checkpoint,
    serialize,
)
from fuse_detect.errors import ConfigHashMismatch, CorruptCheckpoint, VersionMismatch
from fuse_detect.fusion import FusionNormalizer, init_params

FEATURE_CONFIG = {
    "reduction_mode": "axis_profiles",
    "degradation": {
        "apply_probability": 0.5,
        "blur_sigma_min": 0.5,
        "blur_sigma_max": 3.0,
        "jpeg_quality_min": 40,
        "jpeg_quality_max": 95,
    },
    "encoder": "stub:7",
}


def _checkpoint(seed=0):
    params = init_params(24, hidden=8, seed=seed)
    rng = np.random.default_rng(seed)
    norm = FusionNormalizer(
        mean=rng.normal(0, 1, 12).astype(np.float32).astype(np.float64),
        std=np.abs(rng.normal(1, 0.1, 12)).astype(np.float32).astype(np.float64),
    )
    return Checkpoint(params=params, normalizer=norm, feature_config=dict(FEATURE_CONFIG))


def test_roundtrip_bitwise(tmp_path):
    ckpt = _checkpoint()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, ckpt.params, ckpt.normalizer, ckpt.feature_config)
    loaded = load_checkpoint(path)
    for (_, a), (_, b) in zip(ckpt.params.arrays(), loaded.params.arrays()):
        assert a.dtype == b.dtype == np.float32
        assert np.array_equal(a, b)
    assert np.array_equal(loaded.normalizer.mean, ckpt.normalizer.mean)
    assert np.array_equal(loaded.normalizer.std, ckpt.normalizer.std)
    assert loaded.feature_config == ckpt.feature_config
    # Serialization itself is deterministic.
    assert serialize(loaded) == serialize(ckpt)


def test_truncation_detected():
    blob = serialize(_checkpoint())
    for cut in (0, 3, 5, 30, len(blob) // 2, len(blob) - 1):
        with pytest.raises(CorruptCheckpoint):
            deserialize(blob[:cut])


def test_bad_magic():
    blob = bytearray(serialize(_checkpoint()))
    blob[:4] = b"JUNK"
    with pytest.raises(CorruptCheckpoint):
        deserialize(bytes(blob))


def test_version_mismatch():
    blob = bytearray(serialize(_checkpoint()))
    blob[4:6] = (99).to_bytes(2, "little")
    with pytest.raises(VersionMismatch):
        deserialize(bytes(blob))


def test_payload_corruption_detected():
    blob = bytearray(serialize(_checkpoint()))
    blob[-20] ^= 0x40  # flip a bit inside the last parameter block
    with pytest.raises(CorruptCheckpoint):
        deserialize(bytes(blob))


def test_trailing_garbage_detected():
    blob = serialize(_checkpoint())
    with pytest.raises(CorruptCheckpoint):
        deserialize(blob + b"\x00")


def test_config_hash_guard():
    ckpt = _checkpoint()
    ensure_config_hash(ckpt, dict(FEATURE_CONFIG))
    changed = dict(FEATURE_CONFIG, reduction_mode="scalar_stats")
    with pytest.raises(ConfigHashMismatch):
        ensure_config_hash(ckpt, changed)
    deg = dict(FEATURE_CONFIG["degradation"], apply_probability=0.25)
    with pytest.raises(ConfigHashMismatch):
        ensure_config_hash(ckpt, dict(FEATURE_CONFIG, degradation=deg))
