"""ONNX export with a pinned opset and a sidecar manifest.

The sidecar records everything a consumer must match: input/output names and
shapes, the preprocessing constants, the output semantics, how the reference
tower was built, and a topology hash that is stable across re-exports.
"""
import hashlib
import json
from pathlib import Path

import torch

from encoder_export.model import (
    CLIP_MEAN,
    CLIP_STD,
    EMBED_DIM,
    INPUT_SHAPE,
    EmbeddingTower,
    TowerSpec,
)

# Pinned export settings; mirrored in export.lock at the package root.
OPSET = 14
INPUT_NAME = "pixel_values"
OUTPUT_NAME = "image_embeds"


class ExportUnavailable(RuntimeError):
    """Export cannot run in this environment (missing onnx toolchain)."""


def export_graph(model: EmbeddingTower, spec: TowerSpec, output_path) -> Path:
    """Serialize the tower to ONNX and write the sidecar manifest.

    Returns the graph path. Raises ExportUnavailable with a diagnostic when
    the onnx package (required by torch's exporter) is not installed.
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        import onnx  # noqa: F401 — torch.onnx.export requires it at call time
    except ImportError as exc:
        raise ExportUnavailable(
            "the 'onnx' package is required to export the graph; install "
            "fuse-encoder-export[onnx] in an environment with access to an "
            "onnx distribution"
        ) from exc
    dummy = torch.zeros(*INPUT_SHAPE, dtype=torch.float32)
    torch.onnx.export(
        model,
        dummy,
        str(output_path),
        input_names=[INPUT_NAME],
        output_names=[OUTPUT_NAME],
        opset_version=OPSET,
        do_constant_folding=True,
        dynamo=False,
    )
    write_sidecar(output_path, spec)
    return output_path


def topology_hash(graph_path) -> str:
    """sha256 over the graph structure, excluding initializer payloads.

    Stable across re-exports with identical settings; changes when the
    node graph changes.
    """
    import onnx

    model = onnx.load(str(graph_path))
    lines = [f"opset:{model.opset_import[0].version}"]
    for node in model.graph.node:
        attrs = ",".join(sorted(a.name for a in node.attribute))
        lines.append(f"{node.op_type}|{','.join(node.input)}|{','.join(node.output)}|{attrs}")
    for init in model.graph.initializer:
        lines.append(f"init:{init.name}:{list(init.dims)}:{init.data_type}")
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def write_sidecar(graph_path, spec: TowerSpec) -> Path:
    sidecar = Path(str(graph_path) + ".manifest")
    payload = {
        "opset": OPSET,
        "input": {"name": INPUT_NAME, "shape": list(INPUT_SHAPE), "dtype": "float32"},
        "output": {"name": OUTPUT_NAME, "shape": [1, EMBED_DIM], "dtype": "float32"},
        "output_semantics": "post-projection image embedding",
        "preprocessing": {
            "resize": "bilinear to 224x224, samples scaled to [0, 1]",
            "mean": list(CLIP_MEAN),
            "std": list(CLIP_STD),
            "layout": "channel-first",
        },
        "tower": spec.describe(),
        "topology_sha256": topology_hash(graph_path),
    }
    sidecar.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return sidecar
