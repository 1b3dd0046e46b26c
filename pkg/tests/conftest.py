"""Shared fixtures: synthetic image corpora and manifest builders."""
import io
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from fuse_detect.preprocess import gaussian_blur

SIZE = 224

# Sinusoid frequencies (cycles per image, deliberately off-bin so spectral
# leakage spreads energy across every axis profile) used by the synthetic
# "generators" in the toy corpus.
TOY_FREQS = {"gen_alpha": (83.4, 67.7), "gen_beta": (101.3, 58.9)}
TOY_AMPLITUDE = 0.05


def smooth_noise(rng: np.random.Generator, size: int = SIZE) -> np.ndarray:
    """Low-frequency random field: blurred noise with boosted contrast."""
    img = gaussian_blur(rng.random((size, size, 3)), 4.0)
    img = 0.5 + (img - 0.5) * 6.0
    return np.clip(img, 0.0, 1.0)


def make_real(rng: np.random.Generator, size: int = SIZE) -> np.ndarray:
    return smooth_noise(rng, size)


def make_fake(rng: np.random.Generator, gen: str, size: int = SIZE) -> np.ndarray:
    """Smooth base plus a high-frequency sinusoid with random phase."""
    img = smooth_noise(rng, size)
    fx, fy = TOY_FREQS[gen]
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    phase = rng.uniform(0.0, 2.0 * np.pi)
    wave = TOY_AMPLITUDE * np.sin(2.0 * np.pi * (fx * xx / size + fy * yy / size) + phase)
    return np.clip(img + wave[:, :, None], 0.0, 1.0)


def write_png(img: np.ndarray, path: Path) -> None:
    Image.fromarray(np.round(img * 255).astype(np.uint8)).save(path)


def png_bytes(arr: np.ndarray, mode: str = "RGB") -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def jpeg_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="JPEG", quality=90)
    return buf.getvalue()


def build_corpus(root: Path, counts: dict, size: int = SIZE, seed: int = 7) -> Path:
    """Write a PNG corpus plus JSONL manifest.

    counts maps (label, generator, split, stage) -> n.
    """
    rng = np.random.default_rng(seed)
    (root / "img").mkdir(parents=True, exist_ok=True)
    records = []
    idx = 0
    for (label, gen, split, stage), n in counts.items():
        for _ in range(n):
            name = f"img/{idx:04d}.png"
            img = make_real(rng, size) if label == "real" else make_fake(rng, gen, size)
            write_png(img, root / name)
            records.append(
                dict(path=name, label=label, generator=gen, split=split, stage=stage)
            )
            idx += 1
    manifest = root / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return manifest


TOY_COUNTS = {
    ("real", "gen_alpha", "train", "stage1"): 128,
    ("fake", "gen_alpha", "train", "stage1"): 128,
    ("real", "gen_beta", "train", "stage2"): 32,
    ("fake", "gen_beta", "train", "stage2"): 32,
    ("real", "gen_alpha", "test", "stage1"): 20,
    ("real", "gen_beta", "test", "stage1"): 20,
    ("fake", "gen_alpha", "test", "stage1"): 20,
    ("fake", "gen_beta", "test", "stage1"): 20,
}

# Miniature corpus for CLI and pipeline plumbing tests: same structure,
# small images (standardize upscales them), few records.
MINI_COUNTS = {
    ("real", "gen_alpha", "train", "stage1"): 6,
    ("fake", "gen_alpha", "train", "stage1"): 6,
    ("real", "gen_beta", "train", "stage2"): 2,
    ("fake", "gen_beta", "train", "stage2"): 2,
    ("real", "gen_alpha", "test", "stage1"): 3,
    ("fake", "gen_alpha", "test", "stage1"): 3,
}


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """The 400-image corpus used by the end-to-end acceptance criteria."""
    root = tmp_path_factory.mktemp("toy_corpus")
    manifest = build_corpus(root, TOY_COUNTS, size=SIZE, seed=7)
    return root, manifest


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """22 small images; enough to exercise every pipeline/CLI path quickly."""
    root = tmp_path_factory.mktemp("mini_corpus")
    manifest = build_corpus(root, MINI_COUNTS, size=48, seed=11)
    return root, manifest


def write_config(path: Path, manifest: Path, output_dir: Path, **overrides) -> Path:
    """Config file for the stub-encoder pipeline; degradation off by default."""
    opts = {
        "apply_probability": "0.0",
        "stage1_epochs": "4",
        "stage2_epochs": "3",
        "batch_size": "64",
        "replay_fraction": "0.05",
        "learning_rate": "0.0001",
        "seed": "1729",
        "stub_seed": "7",
        "reduction_mode": "axis_profiles",
        "workers": "0",
        "feature_cache": "false",
    }
    opts.update({k: str(v) for k, v in overrides.items()})
    path.write_text(
        f"""[paths]
manifest = {manifest}
output_dir = {output_dir}

[encoder]
backend = stub
stub_seed = {opts['stub_seed']}

[spectral]
reduction_mode = {opts['reduction_mode']}

[degradation]
apply_probability = {opts['apply_probability']}

[training]
stage1_epochs = {opts['stage1_epochs']}
stage2_epochs = {opts['stage2_epochs']}
batch_size = {opts['batch_size']}
replay_fraction = {opts['replay_fraction']}
learning_rate = {opts['learning_rate']}
seed = {opts['seed']}
workers = {opts['workers']}
feature_cache = {opts['feature_cache']}
""",
        encoding="utf-8",
    )
    return path
