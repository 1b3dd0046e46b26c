"""Parity fixture: 16 fixed PNG images plus reference embeddings.

Reference embeddings are computed with the original torch tower, never with
the exported graph, so comparing the graph's outputs against the CSV tests
the export rather than itself. The images are deterministic procedural
content (textures, gradients, patterns, noise) spanning smooth and busy
spectra; they are generated once and checked into the fixture directory.
"""
import csv
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from encoder_export.model import CLIP_MEAN, CLIP_STD, EmbeddingTower, embed

IMAGE_COUNT = 16
SIZE = 224
CSV_NAME = "embeddings.csv"


def _blur1d(img: np.ndarray, sigma: float) -> np.ndarray:
    radius = int(np.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1)
    taps = np.exp(-(x * x) / (2 * sigma * sigma))
    taps /= taps.sum()
    pad = np.pad(img, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(pad, len(taps), axis=1)
    horiz = win @ taps
    win = np.lib.stride_tricks.sliding_window_view(horiz, len(taps), axis=0)
    return win @ taps


def _texture(rng, sigma):
    img = _blur1d(rng.random((SIZE, SIZE, 3)), sigma)
    img = 0.5 + (img - 0.5) * 5.0
    return np.clip(img, 0, 1)


def _gradient(rng):
    yy, xx = np.meshgrid(np.linspace(0, 1, SIZE), np.linspace(0, 1, SIZE), indexing="ij")
    a, b = rng.uniform(0.5, 2.0, 2)
    return np.stack([a * xx, b * yy, (xx + yy) / 2], axis=2) % 1.0


def _checker(rng):
    cell = int(rng.integers(8, 40))
    yy, xx = np.meshgrid(np.arange(SIZE), np.arange(SIZE), indexing="ij")
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    tint = rng.uniform(0.2, 1.0, 3)
    return board[:, :, None] * tint[None, None, :]


def _rings(rng):
    yy, xx = np.meshgrid(np.arange(SIZE) - SIZE / 2, np.arange(SIZE) - SIZE / 2, indexing="ij")
    r = np.sqrt(yy**2 + xx**2)
    freq = rng.uniform(0.1, 0.5)
    img = 0.5 + 0.5 * np.sin(freq * r)
    return np.stack([img, np.roll(img, 11, axis=0), np.roll(img, 23, axis=1)], axis=2)


def _noise(rng):
    return rng.random((SIZE, SIZE, 3))


def generate_images(out_dir) -> list[Path]:
    """Write the 16 fixture PNGs, deterministically."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240816)
    makers = [
        lambda: _texture(rng, 4.0), lambda: _texture(rng, 2.0),
        lambda: _texture(rng, 1.0), lambda: _texture(rng, 6.0),
        lambda: _gradient(rng), lambda: _gradient(rng),
        lambda: _checker(rng), lambda: _checker(rng),
        lambda: _rings(rng), lambda: _rings(rng),
        lambda: _noise(rng), lambda: _noise(rng),
        lambda: np.clip(_texture(rng, 3.0) + 0.2 * _rings(rng) - 0.1, 0, 1),
        lambda: np.clip(0.6 * _gradient(rng) + 0.4 * _noise(rng), 0, 1),
        lambda: np.clip(0.7 * _checker(rng) + 0.3 * _texture(rng, 2.0), 0, 1),
        lambda: np.clip(0.5 * _rings(rng) + 0.5 * _noise(rng), 0, 1),
    ]
    paths = []
    for i, make in enumerate(makers):
        path = out_dir / f"fixture_{i:02d}.png"
        Image.fromarray(np.round(make() * 255).astype(np.uint8)).save(path)
        paths.append(path)
    return paths


def preprocess_png(path) -> torch.Tensor:
    """Decode and normalize one fixture image per the published contract.

    Fixture images are generated at 224x224, so no resize is involved:
    samples scale to [0, 1], channels standardize with the CLIP constants,
    layout becomes 1x3x224x224 float32.
    """
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    if arr.shape != (SIZE, SIZE, 3):
        raise ValueError(f"fixture image must be {SIZE}x{SIZE}x3, got {arr.shape}")
    arr = (arr - np.array(CLIP_MEAN)) / np.array(CLIP_STD)
    chw = np.ascontiguousarray(arr.transpose(2, 0, 1), dtype=np.float32)
    return torch.from_numpy(chw)[None]


def emit_reference_embeddings(model: EmbeddingTower, image_dir, csv_path) -> Path:
    """Run every fixture image through the original tower; write the CSV."""
    image_dir = Path(image_dir)
    images = sorted(image_dir.glob("*.png"))
    if len(images) != IMAGE_COUNT:
        raise ValueError(f"expected {IMAGE_COUNT} fixture images in {image_dir}, found {len(images)}")
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image"] + [f"e{i}" for i in range(512)])
        for path in images:
            vec = embed(model, preprocess_png(path))[0].numpy()
            if not np.isfinite(vec).all():
                raise ValueError(f"non-finite reference embedding for {path.name}")
            writer.writerow([path.name] + [f"{v:.9g}" for v in vec])
    return csv_path
