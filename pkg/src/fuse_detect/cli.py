"""Command-line interface: train, evaluate, predict, extract-features.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime error.
Every failure prints a one-line diagnostic to stderr. All artifacts land
under the configured output directory; a lockfile guards against concurrent
invocations sharing one output directory.
"""
import argparse
import contextlib
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from fuse_detect import checkpoint as ckpt_mod
from fuse_detect import config as config_mod
from fuse_detect import errors, fusion, semantic, spectral
from fuse_detect.evaluation import GroupReport, ScoredSample, group_report, mean_metrics
from fuse_detect.pipeline import FeatureExtractor, StageConfig, load_manifest, run_training
from fuse_detect.preprocess import decode_image, standardize
from fuse_detect.semantic import EncoderConfig, load_encoder

log = logging.getLogger("fuse_detect")

_CONFIG_ERRORS = (errors.ConfigError, errors.ConfigHashMismatch, errors.UnknownTag)
_DATA_ERRORS = (
    errors.UnsupportedFormat,
    errors.CorruptStream,
    errors.ModelNotFound,
    errors.MalformedRecord,
    errors.MissingField,
    errors.EmptyTrainSet,
    errors.CorruptCheckpoint,
    errors.VersionMismatch,
    errors.EmptyInput,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise errors.ConfigError(message)


def _fmt(x: float) -> str:
    """Pinned float serialization: 9 significant digits."""
    return f"{x:.9g}"


@contextlib.contextmanager
def _output_lock(outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    lock = outdir / ".fuse-lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise errors.FuseError(
            f"output directory {outdir} is locked by another invocation "
            f"(remove {lock} if stale)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            lock.unlink()


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_report_csv(path: Path, reports: list[GroupReport]):
    rows = [
        [
            r.generator,
            r.n_real,
            r.n_fake,
            _fmt(r.accuracy),
            _fmt(r.ap) if r.ap is not None else "",
            r.confusion.tp,
            r.confusion.fp,
            r.confusion.tn,
            r.confusion.fn,
        ]
        for r in reports
    ]
    _write_csv(
        path,
        ["generator", "n_real", "n_fake", "accuracy", "ap", "tp", "fp", "tn", "fn"],
        rows,
    )


def _write_confusion_csv(path: Path, reports: list[GroupReport]):
    """Long-form confusion counts, one row per (generator, actual, predicted)."""
    rows = []
    for r in reports:
        c = r.confusion
        rows += [
            [r.generator, "real", "real", c.tn],
            [r.generator, "real", "fake", c.fp],
            [r.generator, "fake", "real", c.fn],
            [r.generator, "fake", "fake", c.tp],
        ]
    _write_csv(path, ["generator", "actual", "predicted", "count"], rows)


def _write_summary_json(path: Path, reports, include=None):
    macc, map_ = mean_metrics(reports, include)
    payload = {
        "mAcc": float(_fmt(macc)),
        "mAP": float(_fmt(map_)) if map_ is not None else None,
        "generators": [r.generator for r in reports],
        "included": list(include) if include is not None else [r.generator for r in reports],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return macc, map_


def _encoder_config_from_feature_config(feature_config: dict, model_path=None) -> EncoderConfig:
    """Rebuild the encoder setup recorded in a checkpoint."""
    identity = feature_config.get("encoder", "")
    kind, _, rest = identity.partition(":")
    if kind == "stub":
        return EncoderConfig(backend="stub", stub_seed=int(rest))
    if kind == "graph_runtime":
        path = os.environ.get("FUSE_MODEL_PATH") or model_path
        if not path:
            raise errors.ConfigError(
                "checkpoint uses the graph_runtime encoder; set FUSE_MODEL_PATH "
                "or provide a config with [encoder] model_path"
            )
        return EncoderConfig(backend="graph_runtime", model_path=path)
    raise errors.CorruptCheckpoint(f"unknown encoder identity {identity!r}")


def _clean_features(img, reduction_mode, encoder, spectral_only=False, semantic_only=False):
    spec = None if semantic_only else spectral.extract_spectral(img, reduction_mode)
    sem = None if spectral_only else semantic.encode(encoder, img)
    return spec, sem


def _load_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return standardize(decode_image(fh.read()))


# --- commands ---


def cmd_train(args) -> int:
    cfg = config_mod.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output is not None:
        cfg.output_dir = args.output
    config_mod.apply_env_overrides(cfg)
    if not cfg.manifest:
        raise errors.ConfigError("config is missing [paths] manifest")
    manifest_path = Path(cfg.manifest)
    records = load_manifest(manifest_path)
    encoder = load_encoder(cfg.encoder)
    degradation = cfg.degradation
    extractor = FeatureExtractor(
        base_dir=manifest_path.parent,
        reduction_mode=cfg.reduction_mode,
        encoder_handle=encoder,
        degradation=degradation,
        seed=cfg.seed,
        workers=cfg.workers,
        feature_cache=cfg.feature_cache,
    )
    stage_cfg = StageConfig(
        stage1_epochs=cfg.stage1_epochs,
        stage2_epochs=cfg.stage2_epochs,
        batch_size=cfg.batch_size,
        replay_fraction=cfg.replay_fraction,
        shuffle_seed=cfg.seed,
        degradation=degradation,
    )
    outdir = Path(cfg.output_dir)
    with _output_lock(outdir):
        result = run_training(records, stage_cfg, extractor, seed=cfg.seed, lr=cfg.learning_rate)
        feature_config = cfg.feature_config()
        for stage, outcome in result.stage_outcomes.items():
            ckpt_mod.save_checkpoint(
                outdir / f"checkpoint_{stage}.ckpt",
                outcome.params,
                result.normalizer,
                feature_config,
            )
            _write_report_csv(outdir / f"eval_{stage}.csv", outcome.reports)
            _write_confusion_csv(outdir / f"eval_{stage}_confusion.csv", outcome.reports)
            macc, map_ = _write_summary_json(
                outdir / f"eval_{stage}_summary.json", outcome.reports
            )
            log.info("%s test: mAcc=%s mAP=%s", stage, _fmt(macc),
                     _fmt(map_) if map_ is not None else "n/a")
        _write_csv(
            outdir / "train_report.csv",
            ["stage", "epoch", "train_loss", "val_loss", "seconds"],
            [
                [e.stage, e.epoch, _fmt(e.train_loss), _fmt(e.val_loss), _fmt(e.seconds)]
                for e in result.report.epochs
            ],
        )
    return 0


def cmd_evaluate(args) -> int:
    ckpt = ckpt_mod.load_checkpoint(args.checkpoint)
    model_path = None
    if args.config:
        cfg = config_mod.load_config(args.config)
        config_mod.apply_env_overrides(cfg)
        ckpt_mod.ensure_config_hash(ckpt, cfg.feature_config())
        model_path = cfg.encoder.model_path
    enc_cfg = _encoder_config_from_feature_config(ckpt.feature_config, model_path)
    encoder = load_encoder(enc_cfg)
    reduction_mode = ckpt.feature_config["reduction_mode"]

    manifest_path = Path(args.manifest)
    records = load_manifest(manifest_path)
    base = manifest_path.parent
    samples = []
    for rec in records:
        img = _load_image(base / rec.path)
        spec, sem = _clean_features(img, reduction_mode, encoder)
        p, _ = fusion.forward(ckpt.params, fusion.fuse(spec, sem, ckpt.normalizer))
        samples.append(
            ScoredSample(score=float(p), label=1 if rec.label == "fake" else 0,
                         generator=rec.generator)
        )
    reports = group_report(samples)
    include = args.include.split(",") if args.include else None
    outdir = Path(args.output or "out")
    with _output_lock(outdir):
        _write_report_csv(outdir / "evaluation.csv", reports)
        _write_confusion_csv(outdir / "evaluation_confusion.csv", reports)
        macc, map_ = _write_summary_json(outdir / "evaluation_summary.json", reports, include)
    print(f"mAcc={_fmt(macc)} mAP={_fmt(map_) if map_ is not None else 'n/a'}")
    return 0


def cmd_predict(args) -> int:
    ckpt = ckpt_mod.load_checkpoint(args.checkpoint)
    model_path = None
    if args.config:
        cfg = config_mod.load_config(args.config)
        config_mod.apply_env_overrides(cfg)
        ckpt_mod.ensure_config_hash(ckpt, cfg.feature_config())
        model_path = cfg.encoder.model_path
    enc_cfg = _encoder_config_from_feature_config(ckpt.feature_config, model_path)
    encoder = load_encoder(enc_cfg)
    reduction_mode = ckpt.feature_config["reduction_mode"]
    failures = 0
    for path in args.images:
        try:
            img = _load_image(path)
            spec, sem = _clean_features(img, reduction_mode, encoder)
            p, _ = fusion.forward(ckpt.params, fusion.fuse(spec, sem, ckpt.normalizer))
            label = "fake" if p >= 0.5 else "real"
            print(f"{path}\t{_fmt(float(p))}\t{label}")
        except (errors.UnsupportedFormat, errors.CorruptStream, OSError) as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
    if failures:
        return 2
    return 0


def cmd_extract_features(args) -> int:
    if args.spectral_only and args.semantic_only:
        raise errors.ConfigError("--spectral-only and --semantic-only are exclusive")
    if args.config:
        cfg = config_mod.load_config(args.config)
        config_mod.apply_env_overrides(cfg)
    else:
        cfg = config_mod.PipelineConfig()
        config_mod.apply_env_overrides(cfg)
    encoder = None if args.spectral_only else load_encoder(cfg.encoder)
    manifest_path = Path(args.manifest)
    records = load_manifest(manifest_path)
    base = manifest_path.parent

    spec_len = spectral.spectral_length(cfg.reduction_mode)
    header = ["id", "label", "generator"]
    if not args.semantic_only:
        header += [f"spec_{cfg.reduction_mode}_{i}" for i in range(spec_len)]
    if not args.spectral_only:
        header += [f"sem_{i}" for i in range(semantic.EMBED_DIM)]

    out_path = Path(args.output_csv)
    if out_path.parent and not out_path.parent.exists():
        out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in records:
            img = _load_image(base / rec.path)
            spec, sem = _clean_features(
                img, cfg.reduction_mode, encoder,
                spectral_only=args.spectral_only, semantic_only=args.semantic_only,
            )
            row = [rec.path, rec.label, rec.generator]
            if spec is not None:
                row += [_fmt(v) for v in spec]
            if sem is not None:
                row += [_fmt(v) for v in sem]
            writer.writerow(row)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fuse-detect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the two-stage training protocol")
    p_train.add_argument("--config", required=True, help="pipeline config file")
    p_train.add_argument("--seed", type=int, default=None, help="override config seed")
    p_train.add_argument("--output", default=None, help="override output directory")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a manifest with a checkpoint")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("manifest")
    p_eval.add_argument("--config", default=None, help="verify checkpoint/config match")
    p_eval.add_argument("--group-by", choices=["generator"], default="generator")
    p_eval.add_argument("--include", default=None, help="comma-separated generator tags")
    p_eval.add_argument("--output", default=None, help="output directory (default: out)")
    p_eval.add_argument("--seed", type=int, default=None, help="accepted for interface parity; scoring is deterministic")
    p_eval.set_defaults(func=cmd_evaluate)

    p_pred = sub.add_parser("predict", help="score individual images")
    p_pred.add_argument("checkpoint")
    p_pred.add_argument("images", nargs="+")
    p_pred.add_argument("--config", default=None)
    p_pred.add_argument("--seed", type=int, default=None, help="accepted for interface parity; scoring is deterministic")
    p_pred.set_defaults(func=cmd_predict)

    p_feat = sub.add_parser("extract-features", help="export feature CSV for a manifest")
    p_feat.add_argument("manifest")
    p_feat.add_argument("output_csv")
    p_feat.add_argument("--config", default=None)
    p_feat.add_argument("--spectral-only", action="store_true")
    p_feat.add_argument("--semantic-only", action="store_true")
    p_feat.add_argument("--seed", type=int, default=None, help="accepted for interface parity; extraction is deterministic")
    p_feat.set_defaults(func=cmd_extract_features)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        raise
    except Exception as exc:  # noqa: BLE001 — runtime errors exit 3 by contract
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
