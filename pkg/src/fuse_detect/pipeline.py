"""Manifest-driven two-stage training.

Stage 1 trains on the stage-1 train split from scratch (4 epochs by default);
stage 2 fine-tunes for 3 more epochs on the new stage-2 records plus a 5%
replay sample of the stage-1 images, which counters catastrophic forgetting.
The spectral normalizer is fitted once on clean stage-1 features and frozen.
After each stage the model is evaluated on the test split.

Determinism: every random draw (shuffles, degradation, holdouts, replay,
weight init) derives from the run seed through fixed stream tags, so two runs
with the same seed and configuration produce identical checkpoints and
evaluation outputs. Worker parallelism fills a pre-assigned index order and
cannot change results.
"""
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from fuse_detect import fusion, semantic, spectral
from fuse_detect.errors import EmptyTrainSet, FuseError, MalformedRecord, MissingField
from fuse_detect.evaluation import GroupReport, ScoredSample, group_report
from fuse_detect.preprocess import DegradationConfig, apply_degradation, decode_image, standardize

log = logging.getLogger(__name__)

LABELS = ("real", "fake")
SPLITS = ("train", "val", "test")
STAGES = ("stage1", "stage2")

# Stream tags keep the seeded random streams independent of each other.
_STREAM_INIT = 1
_STREAM_SHUFFLE = 2
_STREAM_DEGRADE = 3
_STREAM_HOLDOUT = 4
_STREAM_REPLAY = 5
_STREAM_STAGE2_MIX = 6


def _rng(*key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: str
    generator: str
    split: str
    stage: str


@dataclass(frozen=True)
class StageConfig:
    stage1_epochs: int = 4
    stage2_epochs: int = 3
    batch_size: int = 64
    replay_fraction: float = 0.05
    shuffle_seed: int = 0
    degradation: DegradationConfig = field(default_factory=DegradationConfig)

    def __post_init__(self):
        if self.stage1_epochs < 1 or self.stage2_epochs < 1:
            raise ValueError("epoch counts must be >= 1")
        if not 0.0 < self.replay_fraction <= 1.0:
            raise ValueError("replay_fraction must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    stage: str
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)


@dataclass
class StageOutcome:
    params: fusion.MlpParams
    reports: list[GroupReport]
    samples: list[ScoredSample]


@dataclass
class TrainResult:
    stage_outcomes: dict[str, StageOutcome]
    normalizer: fusion.FusionNormalizer
    report: TrainReport


_REQUIRED_FIELDS = ("path", "label", "generator", "split", "stage")


def load_manifest(path) -> list[ManifestRecord]:
    """Parse a JSONL manifest; every record is validated.

    Unknown keys are ignored; duplicate paths are permitted but logged.
    """
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(f"{path}:{lineno}: record must be an object")
            for key in _REQUIRED_FIELDS:
                if key not in obj:
                    raise MissingField(f"{path}:{lineno}: missing field {key!r}")
            rec = ManifestRecord(
                path=str(obj["path"]),
                label=str(obj["label"]),
                generator=str(obj["generator"]),
                split=str(obj["split"]),
                stage=str(obj["stage"]),
            )
            if rec.label not in LABELS:
                raise MalformedRecord(f"{path}:{lineno}: label must be one of {LABELS}")
            if rec.split not in SPLITS:
                raise MalformedRecord(f"{path}:{lineno}: split must be one of {SPLITS}")
            if rec.stage not in STAGES:
                raise MalformedRecord(f"{path}:{lineno}: stage must be one of {STAGES}")
            if rec.label == "fake" and not rec.generator:
                raise MalformedRecord(
                    f"{path}:{lineno}: fake records need a nonempty generator tag"
                )
            if rec.path in seen:
                log.warning("%s:%d: duplicate path %s", path, lineno, rec.path)
            seen.add(rec.path)
            records.append(rec)
    return records


def _ceil_fraction(n: int, fraction: float) -> int:
    """ceil(fraction * n) with the fraction read as an exact decimal."""
    frac = Fraction(str(fraction))
    return int(-((-n * frac.numerator) // frac.denominator))


def replay_sample(records, fraction: float, seed: int) -> list[ManifestRecord]:
    """Uniform sample without replacement of exactly ceil(fraction * N) records.

    Stratified by label so the real/fake proportions survive within one
    record; deterministic for a given seed. Output preserves input order.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    records = list(records)
    if not records:
        return []
    k = _ceil_fraction(len(records), fraction)
    strata = [
        [i for i, r in enumerate(records) if r.label == label] for label in LABELS
    ]
    # Largest-remainder allocation of k across strata (ties favor "real").
    shares = [k * len(s) / len(records) for s in strata]
    quotas = [math.floor(s) for s in shares]
    order = sorted(range(len(strata)), key=lambda i: (-(shares[i] - quotas[i]), i))
    for i in order[: k - sum(quotas)]:
        quotas[i] += 1
    rng = _rng(seed, _STREAM_REPLAY)
    chosen: list[int] = []
    for stratum, quota in zip(strata, quotas):
        if quota:
            picked = rng.choice(len(stratum), size=quota, replace=False)
            chosen.extend(stratum[j] for j in picked)
    return [records[i] for i in sorted(chosen)]


def build_stage2_set(stage1_records, stage2_new_records, cfg: StageConfig) -> list[ManifestRecord]:
    """Replay sample of stage 1 plus all new stage-2 records, shuffled."""
    combined = replay_sample(stage1_records, cfg.replay_fraction, cfg.shuffle_seed)
    combined = combined + list(stage2_new_records)
    rng = _rng(cfg.shuffle_seed, _STREAM_STAGE2_MIX)
    perm = rng.permutation(len(combined))
    return [combined[i] for i in perm]


class FeatureExtractor:
    """Computes (spectral, semantic) features for manifest records.

    Clean features for val/test are cached per record identity; training
    features are recomputed per epoch because degradation is stochastic.
    """

    def __init__(self, base_dir, reduction_mode, encoder_handle, degradation,
                 seed, workers=0, feature_cache=False):
        self.base_dir = Path(base_dir)
        self.reduction_mode = reduction_mode
        self.encoder = encoder_handle
        self.degradation = degradation
        self.seed = seed
        self.workers = workers if encoder_handle.parallel_safe else 0
        if workers and not encoder_handle.parallel_safe:
            log.warning("encoder backend is not picklable; extracting sequentially")
        self.feature_cache = feature_cache
        self._clean_cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def training_features(self, records, stage_no, epoch):
        """Per-epoch features with degradation, in record order."""
        if self.feature_cache:
            # Cache mode trades the stochastic degradation for speed.
            return [self.clean_features(r) for r in records]
        degrade = self.degradation.apply_probability > 0
        jobs = [
            (str(self.base_dir), rec, self.reduction_mode, self.encoder,
             self.degradation, self.seed, stage_no, epoch, idx, degrade)
            for idx, rec in enumerate(records)
        ]
        if self.workers and len(records) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(_features_task, jobs, chunksize=8))
        return [_features_task(job) for job in jobs]

    def clean_features(self, rec: ManifestRecord):
        """Degradation-free features, cached by record path."""
        key = f"{rec.path}\x00{rec.label}\x00{rec.generator}"
        if key not in self._clean_cache:
            job = (str(self.base_dir), rec, self.reduction_mode, self.encoder,
                   self.degradation, self.seed, 0, 0, 0, False)
            self._clean_cache[key] = _features_task(job)
        return self._clean_cache[key]


def _features_task(job):
    """Feature computation for one record; free function so pools can map it."""
    base_dir, rec, mode, encoder, degradation, seed, stage_no, epoch, index, degrade = job
    path = Path(base_dir) / rec.path
    try:
        with open(path, "rb") as fh:
            img = standardize(decode_image(fh.read()))
    except FuseError as exc:
        raise type(exc)(f"{path}: {exc}") from exc
    except OSError as exc:
        raise FileNotFoundError(f"{path}: {exc}") from exc
    if degrade:
        rng = _rng(seed, _STREAM_DEGRADE, stage_no, epoch, index)
        img = apply_degradation(img, degradation, rng)
    return spectral.extract_spectral(img, mode), semantic.encode(encoder, img)


def _fused_matrix(features, normalizer):
    return np.stack([fusion.fuse(spec, sem, normalizer) for spec, sem in features])


def _labels(records) -> np.ndarray:
    return np.array([1.0 if r.label == "fake" else 0.0 for r in records])


def _holdout_split(records, seed, stage_no):
    """Seeded 5% holdout used when the manifest carries no val split."""
    if len(records) < 2:
        return list(records), []
    val = replay_sample(records, 0.05, seed * 1000003 + stage_no * 101 + _STREAM_HOLDOUT)
    val_keys = {id(r) for r in val}
    train = [r for r in records if id(r) not in val_keys]
    return train, val


def _mean_loss(params, feats, labels, normalizer):
    if not feats:
        return float("nan")
    xs = _fused_matrix(feats, normalizer)
    _, (_, _, logit) = fusion.forward(params, xs)
    return fusion.bce_loss(logit, labels)


def run_training(records, cfg: StageConfig, extractor: FeatureExtractor,
                 seed: int, lr: float = 1e-4) -> TrainResult:
    """Execute the full two-stage protocol and per-stage test evaluation."""
    stage1_train = [r for r in records if r.split == "train" and r.stage == "stage1"]
    stage2_new = [r for r in records if r.split == "train" and r.stage == "stage2"]
    manifest_val = [r for r in records if r.split == "val"]
    test_records = [r for r in records if r.split == "test"]
    if not stage1_train:
        raise EmptyTrainSet("manifest has no stage-1 train records")

    log.info(
        "training: %d stage-1, %d stage-2, %d val, %d test records",
        len(stage1_train), len(stage2_new), len(manifest_val), len(test_records),
    )

    # Normalizer: clean stage-1 spectral features, frozen for both stages.
    clean = [extractor.clean_features(r)[0] for r in stage1_train]
    normalizer = fusion.fit_normalizer(clean).quantized()

    in_dim = len(clean[0]) + semantic.EMBED_DIM
    params = fusion.init_params(in_dim, seed=seed)
    report = TrainReport()
    outcomes: dict[str, StageOutcome] = {}

    stage_sets = {
        "stage1": (1, cfg.stage1_epochs, stage1_train),
        "stage2": (2, cfg.stage2_epochs, build_stage2_set(stage1_train, stage2_new, cfg)),
    }
    for stage, (stage_no, epochs, stage_records) in stage_sets.items():
        if manifest_val:
            train_recs, val_recs = list(stage_records), manifest_val
        else:
            train_recs, val_recs = _holdout_split(stage_records, cfg.shuffle_seed, stage_no)
        if not train_recs:
            raise EmptyTrainSet(f"no training records left for {stage}")
        val_feats = [extractor.clean_features(r) for r in val_recs]
        val_labels = _labels(val_recs)
        # Fresh optimizer state per stage: the data distribution shifts.
        state = fusion.AdamState.for_params(params, lr=lr)
        for epoch in range(1, epochs + 1):
            t0 = time.perf_counter()
            order = _rng(cfg.shuffle_seed, _STREAM_SHUFFLE, stage_no, epoch).permutation(
                len(train_recs)
            )
            epoch_recs = [train_recs[i] for i in order]
            feats = extractor.training_features(epoch_recs, stage_no, epoch)
            labels = _labels(epoch_recs)
            loss_sum = 0.0
            for lo in range(0, len(epoch_recs), cfg.batch_size):
                hi = min(lo + cfg.batch_size, len(epoch_recs))
                xs = _fused_matrix(feats[lo:hi], normalizer)
                ys = labels[lo:hi]
                _, (_, _, logit) = fusion.forward(params, xs)
                loss_sum += fusion.bce_loss(logit, ys) * (hi - lo)
                grads = fusion.backward(params, xs, ys)
                fusion.adam_step(params, grads, state)
            train_loss = loss_sum / len(epoch_recs)
            # Degenerate manifests can leave no holdout; keep losses finite.
            val_loss = (
                _mean_loss(params, val_feats, val_labels, normalizer)
                if val_feats
                else train_loss
            )
            seconds = time.perf_counter() - t0
            report.epochs.append(
                EpochRecord(stage, epoch, train_loss, val_loss, seconds)
            )
            log.info(
                "%s epoch %d/%d: train_loss=%.6f val_loss=%.6f (%.1fs)",
                stage, epoch, epochs, train_loss, val_loss, seconds,
            )
        samples = score_records(test_records, params, normalizer, extractor)
        outcomes[stage] = StageOutcome(
            params=params.copy(),
            reports=group_report(samples),
            samples=samples,
        )
    return TrainResult(stage_outcomes=outcomes, normalizer=normalizer, report=report)


def score_records(records, params, normalizer, extractor) -> list[ScoredSample]:
    """Clean-feature scores for a record list (no degradation)."""
    samples = []
    for rec in records:
        spec, sem = extractor.clean_features(rec)
        p, _ = fusion.forward(params, fusion.fuse(spec, sem, normalizer))
        samples.append(
            ScoredSample(score=float(p), label=1 if rec.label == "fake" else 0,
                         generator=rec.generator)
        )
    return samples
