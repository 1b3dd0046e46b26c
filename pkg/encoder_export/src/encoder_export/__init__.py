"""One-shot converter: CLIP ViT-B/32 vision tower -> portable inference graph."""

__version__ = "0.1.0"
