"""Semantic embeddings via a pluggable 512-dim vision encoder.

Two backends implement the same contract:

* ``graph_runtime`` — runs an ONNX graph (input "pixel_values" float32
  1x3x224x224, output "image_embeds" float32 1x512) through onnxruntime.
  The graph signature is validated at load time.
* ``stub`` — a deterministic pseudo-encoder for tests and offline work: the
  image bytes are hashed (keyed by a seed) and expanded to 512 values in
  [-1, 1]. Identical images always yield identical embeddings.
"""
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from fuse_detect.errors import (
    ConfigError,
    ModelNotFound,
    RuntimeFailure,
    SignatureMismatch,
)

EMBED_DIM = 512
GRAPH_INPUT_NAME = "pixel_values"
GRAPH_OUTPUT_NAME = "image_embeds"
GRAPH_INPUT_SHAPE = (1, 3, 224, 224)
GRAPH_OUTPUT_SHAPE = (1, EMBED_DIM)

# Reference normalization constants from the CLIP release.
CLIP_MEAN = np.array([0.48145466, 0.4578275, 0.40821073])
CLIP_STD = np.array([0.26862954, 0.26130258, 0.27577711])


@dataclass(frozen=True)
class EncoderConfig:
    backend: str = "stub"
    model_path: str | None = None
    stub_seed: int = 0

    def identity(self) -> str:
        """Stable identity string recorded in the checkpoint config hash."""
        if self.backend == "stub":
            return f"stub:{self.stub_seed}"
        name = os.path.basename(self.model_path) if self.model_path else "?"
        return f"graph_runtime:{name}"


@dataclass
class EncoderHandle:
    """Ready-to-use encoder; immutable after load, shareable across workers."""

    backend: str
    stub_seed: int = 0
    model_path: str | None = None
    session: object = field(default=None, repr=False)

    @property
    def parallel_safe(self) -> bool:
        """Whether the handle may be pickled into worker processes."""
        return self.backend == "stub"


def load_encoder(cfg: EncoderConfig) -> EncoderHandle:
    """Build an encoder handle, validating the graph signature if any."""
    if cfg.backend == "stub":
        return EncoderHandle(backend="stub", stub_seed=cfg.stub_seed)
    if cfg.backend != "graph_runtime":
        raise ConfigError(f"unknown encoder backend {cfg.backend!r}")
    if not cfg.model_path or not os.path.isfile(cfg.model_path):
        raise ModelNotFound(f"encoder model file not found: {cfg.model_path!r}")
    try:
        import onnxruntime as ort
    except ImportError as exc:
        raise RuntimeFailure(
            "graph_runtime backend requires onnxruntime (pip install "
            "fuse-detect[graph])"
        ) from exc
    try:
        session = ort.InferenceSession(cfg.model_path, providers=["CPUExecutionProvider"])
    except Exception as exc:
        raise RuntimeFailure(f"failed to load encoder graph: {exc}") from exc
    _validate_signature(session)
    return EncoderHandle(
        backend="graph_runtime", model_path=cfg.model_path, session=session
    )


def _validate_signature(session) -> None:
    inputs = session.get_inputs()
    outputs = session.get_outputs()
    if len(inputs) != 1 or len(outputs) != 1:
        raise SignatureMismatch(
            f"graph must have exactly one input and one output "
            f"(got {len(inputs)}/{len(outputs)})"
        )
    if inputs[0].name != GRAPH_INPUT_NAME or tuple(inputs[0].shape) != GRAPH_INPUT_SHAPE:
        raise SignatureMismatch(
            f"input must be {GRAPH_INPUT_NAME} {GRAPH_INPUT_SHAPE} "
            f"(got {inputs[0].name} {inputs[0].shape})"
        )
    if outputs[0].name != GRAPH_OUTPUT_NAME or tuple(outputs[0].shape) != GRAPH_OUTPUT_SHAPE:
        raise SignatureMismatch(
            f"output must be {GRAPH_OUTPUT_NAME} {GRAPH_OUTPUT_SHAPE} "
            f"(got {outputs[0].name} {outputs[0].shape})"
        )


def clip_preprocess(img: np.ndarray) -> np.ndarray:
    """Standardize channels with the CLIP constants; returns float32 CHW."""
    out = (img - CLIP_MEAN) / CLIP_STD
    return np.ascontiguousarray(out.transpose(2, 0, 1), dtype=np.float32)


def _stub_embedding(img: np.ndarray, seed: int) -> np.ndarray:
    payload = np.ascontiguousarray(img, dtype=np.float64).tobytes()
    digest = hashlib.blake2b(
        payload,
        digest_size=16,
        person=b"fuse-stub-v1",
        salt=int(seed).to_bytes(8, "little", signed=False),
    ).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    return rng.uniform(-1.0, 1.0, EMBED_DIM)


def encode(handle: EncoderHandle, img: np.ndarray) -> np.ndarray:
    """Embed one normalized image; always 512 finite values or RuntimeFailure."""
    if handle.backend == "stub":
        return _stub_embedding(img, handle.stub_seed)
    x = clip_preprocess(img)[None]
    try:
        (out,) = handle.session.run([GRAPH_OUTPUT_NAME], {GRAPH_INPUT_NAME: x})
    except Exception as exc:
        raise RuntimeFailure(f"encoder graph execution failed: {exc}") from exc
    out = np.asarray(out, dtype=np.float64).reshape(-1)
    if out.shape != (EMBED_DIM,) or not np.isfinite(out).all():
        raise RuntimeFailure("encoder graph returned an invalid embedding")
    return out


def encode_batch(handle: EncoderHandle, imgs) -> np.ndarray:
    """Embed a sequence of images; row i equals encode(handle, imgs[i])."""
    return np.stack([encode(handle, img) for img in imgs])
