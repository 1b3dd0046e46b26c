"""Reference vision tower: pretrained CLIP ViT-B/32, or a seeded twin.

The detector consumes a graph with one input "pixel_values" (float32,
1x3x224x224) and one output "image_embeds" (float32, 1x512) — the
post-projection image embedding. When the pretrained weights are not
obtainable (offline environments), a randomly initialized tower with the
exact ViT-B/32 architecture stands in: it exercises the full export and
parity machinery; only the embedding values differ from the released model.
"""
from dataclasses import dataclass

import torch
from transformers import CLIPVisionConfig, CLIPVisionModelWithProjection

PRETRAINED_ID = "openai/clip-vit-base-patch32"
EMBED_DIM = 512
INPUT_SHAPE = (1, 3, 224, 224)

# Preprocessing constants from the CLIP release; recorded in the sidecar
# manifest so the consumer's normalization provably matches.
CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


@dataclass(frozen=True)
class TowerSpec:
    """How the reference tower was constructed; recorded in the sidecar."""

    pretrained: bool
    seed: int = 0

    def describe(self) -> str:
        if self.pretrained:
            return f"pretrained:{PRETRAINED_ID}"
        return f"random-init:seed={self.seed}"


class EmbeddingTower(torch.nn.Module):
    """Wraps the HF vision model to expose only the 512-d image embedding."""

    def __init__(self, inner: CLIPVisionModelWithProjection):
        super().__init__()
        self.inner = inner

    def forward(self, pixel_values: torch.Tensor) -> torch.Tensor:
        return self.inner(pixel_values=pixel_values).image_embeds


def build_tower(spec: TowerSpec) -> EmbeddingTower:
    """Construct the reference tower deterministically."""
    if spec.pretrained:
        inner = CLIPVisionModelWithProjection.from_pretrained(PRETRAINED_ID)
    else:
        # CLIPVisionConfig defaults are exactly the ViT-B/32 vision tower
        # (768 hidden, 12 layers, patch 32, 224 input, 512 projection).
        torch.manual_seed(spec.seed)
        inner = CLIPVisionModelWithProjection(CLIPVisionConfig())
    model = EmbeddingTower(inner.eval())
    for p in model.parameters():
        p.requires_grad_(False)
    return model


@torch.no_grad()
def embed(model: EmbeddingTower, pixel_values: torch.Tensor) -> torch.Tensor:
    out = model(pixel_values)
    if out.shape != (pixel_values.shape[0], EMBED_DIM):
        raise RuntimeError(f"tower produced unexpected shape {tuple(out.shape)}")
    return out
