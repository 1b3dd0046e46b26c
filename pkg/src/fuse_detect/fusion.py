"""Feature fusion and the trainable classification head.

Spectral features are z-scored with statistics frozen from the stage-1
training set, then concatenated with the raw semantic embedding (spectral
block first). The classifier is a single-hidden-layer MLP (relu, width 256,
sigmoid output) trained with binary cross-entropy and Adam, all implemented
here directly on numpy arrays.

Arithmetic is carried out in float64 regardless of the parameter dtype;
updates are written back in the parameter dtype, so float32 master weights
(the checkpoint format) stay bit-reproducible.
"""
import math
from dataclasses import dataclass

import numpy as np

from fuse_detect.errors import (
    DimensionMismatch,
    EmptyBatch,
    EmptyInput,
    ShapeMismatch,
)

HIDDEN_WIDTH = 256
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FusionNormalizer:
    """Per-dimension z-score statistics for the spectral block."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise DimensionMismatch("normalizer mean/std must be equal-length vectors")

    def quantized(self) -> "FusionNormalizer":
        """Round statistics to checkpoint precision (float32) once, up front.

        Training freezes the quantized form so in-run evaluation matches
        evaluation after a save/load round trip exactly.
        """
        return FusionNormalizer(
            mean=self.mean.astype(np.float32).astype(np.float64),
            std=self.std.astype(np.float32).astype(np.float64),
        )


def fit_normalizer(spectral_features) -> FusionNormalizer:
    """Population mean/std per dimension; std floored at 1e-8."""
    mat = np.asarray(spectral_features, dtype=np.float64)
    if mat.size == 0:
        raise EmptyInput("cannot fit a normalizer on an empty collection")
    if mat.ndim == 1:
        mat = mat[None, :]
    mean = mat.mean(axis=0)
    std = np.sqrt(mat.var(axis=0))
    return FusionNormalizer(mean=mean, std=np.maximum(std, STD_FLOOR))


def fuse(spec: np.ndarray, sem: np.ndarray, norm: FusionNormalizer) -> np.ndarray:
    """Joint representation: [(spec - mean)/std || sem], spectral block first."""
    spec = np.asarray(spec, dtype=np.float64)
    sem = np.asarray(sem, dtype=np.float64)
    if spec.shape != norm.mean.shape:
        raise DimensionMismatch(
            f"spectral length {spec.shape} does not match normalizer "
            f"{norm.mean.shape}"
        )
    return np.concatenate([(spec - norm.mean) / norm.std, sem])


@dataclass
class MlpParams:
    """Weights of the classification head; also used as a gradient carrier."""

    w1: np.ndarray  # (hidden, in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (1, hidden)
    b2: np.ndarray  # (1,)

    def arrays(self):
        return [("w1", self.w1), ("b1", self.b1), ("w2", self.w2), ("b2", self.b2)]

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


def init_params(
    in_dim: int, hidden: int = HIDDEN_WIDTH, seed: int = 0, dtype=np.float32
) -> MlpParams:
    """Seeded Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
    l1 = math.sqrt(6.0 / (in_dim + hidden))
    l2 = math.sqrt(6.0 / (hidden + 1))
    return MlpParams(
        w1=rng.uniform(-l1, l1, (hidden, in_dim)).astype(dtype),
        b1=np.zeros(hidden, dtype=dtype),
        w2=rng.uniform(-l2, l2, (1, hidden)).astype(dtype),
        b2=np.zeros(1, dtype=dtype),
    )


def forward(params: MlpParams, x: np.ndarray):
    """Probability of the fake class for one vector or a (B, L) batch.

    Returns (p, cache) where cache = (x, h, logit) feeds backward().
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.w1.shape[1]:
        raise DimensionMismatch(
            f"input width {x.shape[-1]} does not match w1 {params.w1.shape}"
        )
    w1 = params.w1.astype(np.float64)
    w2 = params.w2.astype(np.float64)
    h = np.maximum(x @ w1.T + params.b1.astype(np.float64), 0.0)
    logit = h @ w2[0] + float(params.b2[0])
    p = _sigmoid(logit)
    return p, (x, h, logit)


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def bce_loss(logit, y) -> float:
    """Mean binary cross-entropy computed from logits (overflow-safe form).

    loss = max(z, 0) - z*y + log(1 + exp(-|z|)), averaged over the batch.
    """
    z = np.asarray(logit, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(loss))


def backward(params: MlpParams, xs: np.ndarray, ys: np.ndarray) -> MlpParams:
    """Mean-over-batch gradients of the BCE loss; relu subgradient 0 at 0."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[None, :]
        ys = np.atleast_1d(ys)
    if xs.shape[0] == 0:
        raise EmptyBatch("gradient computation needs at least one sample")
    p, (_, h, _) = forward(params, xs)
    b = xs.shape[0]
    d_logit = (p - ys) / b  # (B,)
    g_w2 = (d_logit @ h)[None, :]
    g_b2 = np.array([d_logit.sum()])
    dz1 = np.where(h > 0.0, d_logit[:, None] * params.w2.astype(np.float64)[0], 0.0)
    g_w1 = dz1.T @ xs
    g_b1 = dz1.sum(axis=0)
    return MlpParams(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2)


@dataclass
class AdamState:
    """Adam accumulators; lr per the training setup, standard betas."""

    m: MlpParams
    v: MlpParams
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = 1e-4) -> "AdamState":
        zeros = lambda a: np.zeros(a.shape, dtype=np.float64)  # noqa: E731
        return cls(
            m=MlpParams(*(zeros(a) for _, a in params.arrays())),
            v=MlpParams(*(zeros(a) for _, a in params.arrays())),
            lr=lr,
        )


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState):
    """One Adam update, in place; returns (params, state).

    t += 1; m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2;
    theta -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
    """
    for (_, p), (_, g) in zip(params.arrays(), grads.arrays()):
        if p.shape != g.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} != parameter {p.shape}")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for (_, p), (_, g), (_, m), (_, v) in zip(
        params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()
    ):
        g64 = g.astype(np.float64)
        m *= state.beta1
        m += (1.0 - state.beta1) * g64
        v *= state.beta2
        v += (1.0 - state.beta2) * g64 * g64
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p[...] = p.astype(np.float64) - update
    return params, state
