"""Detection metrics: accuracy, average precision, per-generator reports.

Fake is the positive class and the decision threshold is 0.5 (scores at the
threshold classify as fake). Real samples are assigned to generator groups
by the tag carried in the manifest, so per-generator AP has negatives; groups
without real samples report accuracy only. Aggregate means are unweighted
over the included generators.
"""
from dataclasses import dataclass

import numpy as np

from fuse_detect.errors import EmptyInput, SingleClassInput, UnknownTag

THRESHOLD = 0.5


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: int  # 0 = real, 1 = fake
    generator: str


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class GroupReport:
    generator: str
    accuracy: float  # percent
    ap: float | None  # percent; None when the group lacks a class
    confusion: ConfusionMatrix
    n_real: int
    n_fake: int


def confusion_matrix(samples, threshold: float = THRESHOLD) -> ConfusionMatrix:
    tp = fp = tn = fn = 0
    for s in samples:
        pred = s.score >= threshold
        if s.label == 1:
            tp, fn = tp + pred, fn + (not pred)
        else:
            fp, tn = fp + pred, tn + (not pred)
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def accuracy(samples, threshold: float = THRESHOLD) -> float:
    """Percent of samples whose thresholded score matches the label."""
    samples = list(samples)
    if not samples:
        raise EmptyInput("accuracy needs at least one sample")
    correct = sum((s.score >= threshold) == bool(s.label) for s in samples)
    return 100.0 * correct / len(samples)


def average_precision(samples) -> float:
    """Rank-based AP in percent: mean precision at each positive hit.

    Samples are sorted by descending score, ties broken by stable input
    order; AP = (1/P) * sum over positive ranks k of precision@k.
    """
    samples = list(samples)
    n_pos = sum(s.label == 1 for s in samples)
    n_neg = len(samples) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("AP needs at least one positive and one negative")
    order = sorted(range(len(samples)), key=lambda i: -samples[i].score)
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if samples[idx].label == 1:
            hits += 1
            total += hits / rank
    return 100.0 * total / n_pos


def group_report(samples) -> list[GroupReport]:
    """Per-generator metrics, in first-appearance order of the tags."""
    groups: dict[str, list[ScoredSample]] = {}
    for s in samples:
        groups.setdefault(s.generator, []).append(s)
    reports = []
    for tag, members in groups.items():
        n_real = sum(s.label == 0 for s in members)
        n_fake = len(members) - n_real
        try:
            ap = average_precision(members)
        except SingleClassInput:
            ap = None
        reports.append(
            GroupReport(
                generator=tag,
                accuracy=accuracy(members),
                ap=ap,
                confusion=confusion_matrix(members),
                n_real=n_real,
                n_fake=n_fake,
            )
        )
    return reports


def mean_metrics(reports, include=None):
    """Unweighted (mAcc, mAP) over the included generator tags.

    mAP skips groups without an AP value and is None if no group has one.
    """
    tags = [r.generator for r in reports]
    if include is None:
        include = tags
    unknown = [t for t in include if t not in tags]
    if unknown:
        raise UnknownTag(f"tags not present in reports: {unknown}")
    chosen = [r for r in reports if r.generator in set(include)]
    macc = float(np.mean([r.accuracy for r in chosen]))
    aps = [r.ap for r in chosen if r.ap is not None]
    map_ = float(np.mean(aps)) if aps else None
    return macc, map_
