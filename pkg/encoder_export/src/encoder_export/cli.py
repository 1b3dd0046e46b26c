"""Command line: export the graph, emit the parity fixture, verify parity."""
import argparse
import csv
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from encoder_export.export import ExportUnavailable, export_graph
from encoder_export.fixture import emit_reference_embeddings, generate_images, preprocess_png
from encoder_export.model import TowerSpec, build_tower, embed

PKG_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_GRAPH = PKG_ROOT / "artifacts" / "clip_vitb32_vision.onnx"
DEFAULT_FIXTURE = PKG_ROOT / "artifacts" / "parity"
FIXTURE_IMAGES = PKG_ROOT / "fixture_images"


def _tower_spec(args) -> TowerSpec:
    return TowerSpec(pretrained=args.pretrained, seed=args.seed)


def cmd_export(args) -> int:
    spec = _tower_spec(args)
    model = build_tower(spec)
    path = export_graph(model, spec, args.output)
    print(f"exported {path} (sidecar: {path}.manifest)")
    return 0


def cmd_make_images(args) -> int:
    paths = generate_images(args.output)
    print(f"wrote {len(paths)} fixture images to {args.output}")
    return 0


def cmd_fixture(args) -> int:
    spec = _tower_spec(args)
    image_dir = Path(args.images)
    if not image_dir.is_dir() or not any(image_dir.glob("*.png")):
        print(f"error: no fixture images in {image_dir}; run make-images first", file=sys.stderr)
        return 2
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    for src in sorted(image_dir.glob("*.png")):
        shutil.copy2(src, out_dir / src.name)
    model = build_tower(spec)
    csv_path = emit_reference_embeddings(model, out_dir, out_dir / "embeddings.csv")
    meta = {"tower": spec.describe(), "graph": str(args.graph) if args.graph else None}
    (out_dir / "fixture.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"fixture ready: {csv_path}")
    return 0


def cmd_verify(args) -> int:
    try:
        import onnxruntime as ort
    except ImportError:
        print("error: verification requires onnxruntime", file=sys.stderr)
        return 3
    sess = ort.InferenceSession(str(args.graph), providers=["CPUExecutionProvider"])
    fixture = Path(args.fixture)
    with open(fixture / "embeddings.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    worst = 1.0
    for name, *vals in rows:
        ref = np.array([float(v) for v in vals])
        x = preprocess_png(fixture / name).numpy()
        (out,) = sess.run(["image_embeds"], {"pixel_values": x})
        vec = out.reshape(-1).astype(np.float64)
        cos = float(vec @ ref / (np.linalg.norm(vec) * np.linalg.norm(ref)))
        worst = min(worst, cos)
        status = "ok" if cos >= 0.999 else "FAIL"
        print(f"{name}: cosine {cos:.6f} {status}")
    print(f"min cosine: {worst:.6f}")
    return 0 if worst >= 0.999 else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="fuse-encoder-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_tower_args(p):
        group = p.add_mutually_exclusive_group()
        group.add_argument("--pretrained", action="store_true",
                           help="use the released CLIP ViT-B/32 weights (needs network/cache)")
        group.add_argument("--random-init", dest="pretrained", action="store_false",
                           help="seeded random weights with the exact architecture (default)")
        p.set_defaults(pretrained=False)
        p.add_argument("--seed", type=int, default=0, help="random-init seed")

    p = sub.add_parser("export", help="export the vision tower to ONNX")
    p.add_argument("--output", default=str(DEFAULT_GRAPH))
    add_tower_args(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("make-images", help="generate the 16 fixture PNGs")
    p.add_argument("--output", default=str(FIXTURE_IMAGES))
    p.set_defaults(func=cmd_make_images)

    p = sub.add_parser("fixture", help="emit reference embeddings for the fixture images")
    p.add_argument("--images", default=str(FIXTURE_IMAGES))
    p.add_argument("--output", default=str(DEFAULT_FIXTURE))
    p.add_argument("--graph", default=None, help="graph file this fixture accompanies")
    add_tower_args(p)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("verify", help="run the exported graph against the fixture")
    p.add_argument("--graph", default=str(DEFAULT_GRAPH))
    p.add_argument("--fixture", default=str(DEFAULT_FIXTURE))
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExportUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 — one-shot tool, fail with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
