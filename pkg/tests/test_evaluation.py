"""Metric tests with a threshold-sweep AP oracle and published aggregates."""
import numpy as np
import pytest

from fuse_detect.errors import EmptyInput, SingleClassInput, UnknownTag
from fuse_detect.evaluation import (
    ConfusionMatrix,
    GroupReport,
    ScoredSample,
    accuracy,
    average_precision,
    confusion_matrix,
    group_report,
    mean_metrics,
)

# ---------------------------------------------------------------- oracle


def ap_sweep_oracle(samples) -> float:
    """Brute-force AP: rescan the whole set at every distinct threshold.

    Walks thresholds in descending order; each threshold's precision is
    computed from fresh full-array counts. Defined for distinct scores.
    """
    scores = [s.score for s in samples]
    labels = [s.label for s in samples]
    n_pos = sum(labels)
    total = 0.0
    prev_tp = 0
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for sc, lb in zip(scores, labels) if sc >= t and lb == 1)
        kept = sum(1 for sc in scores if sc >= t)
        total += (tp - prev_tp) * (tp / kept)
        prev_tp = tp
    return 100.0 * total / n_pos


def _mk(scores, labels, gen="g"):
    return [ScoredSample(float(s), int(l), gen) for s, l in zip(scores, labels)]


# ---------------------------------------------------------------- accuracy


def test_accuracy_all_correct():
    assert accuracy(_mk([0.9, 0.8, 0.1], [1, 1, 0])) == 100.0


def test_accuracy_threshold_boundary_is_fake():
    assert accuracy(_mk([0.5, 0.5], [1, 1])) == 100.0
    assert accuracy(_mk([0.5], [0])) == 0.0


def test_accuracy_three_of_four():
    assert accuracy(_mk([0.9, 0.8, 0.2, 0.7], [1, 1, 0, 0])) == 75.0


def test_accuracy_empty():
    with pytest.raises(EmptyInput):
        accuracy([])


def test_accuracy_plus_error_is_exactly_100():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 400))
        labels = rng.integers(0, 2, n)
        scores = rng.random(n)
        samples = _mk(scores, labels)
        acc = accuracy(samples)
        wrong = sum((s.score >= 0.5) != bool(s.label) for s in samples)
        err = 100.0 * wrong / n
        assert acc + err == 100.0


# ---------------------------------------------------------------- AP


def test_ap_perfect_ranking():
    assert average_precision(_mk([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])) == 100.0


def test_ap_single_positive_ranked_second():
    # Descending order: [negative, positive] -> precision@2 = 1/2.
    assert average_precision(_mk([0.9, 0.4], [0, 1])) == 50.0


def test_ap_single_class_signals():
    with pytest.raises(SingleClassInput):
        average_precision(_mk([0.5, 0.6], [1, 1]))
    with pytest.raises(SingleClassInput):
        average_precision(_mk([0.5, 0.6], [0, 0]))


def test_ap_tie_broken_by_input_order():
    assert average_precision(_mk([0.5, 0.5], [1, 0])) == 100.0
    assert average_precision(_mk([0.5, 0.5], [0, 1])) == 50.0


def test_ap_matches_sweep_oracle_random():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        samples = _mk(rng.random(n), labels)
        assert average_precision(samples) == ap_sweep_oracle(samples)


def test_ap_exhaustive_small_label_arrangements():
    rng = np.random.default_rng(2)
    for n in range(2, 9):
        scores = np.sort(rng.random(n))[::-1]  # distinct descending
        for mask in range(1, 2**n - 1):
            labels = [(mask >> i) & 1 for i in range(n)]
            samples = _mk(scores, labels)
            assert average_precision(samples) == ap_sweep_oracle(samples)


def test_ap_invariant_under_monotone_transform():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 2, 30)
    labels[0], labels[1] = 0, 1
    scores = rng.random(30)
    base = average_precision(_mk(scores, labels))
    warped = average_precision(_mk(np.exp(3.0 * scores) + 1.0, labels))
    assert base == warped


# ---------------------------------------------------------------- confusion


def test_confusion_marginals():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(1, 100))
        labels = rng.integers(0, 2, n)
        samples = _mk(rng.random(n), labels)
        c = confusion_matrix(samples)
        assert c.total == n
        assert c.tp + c.fn == int(labels.sum())
        assert c.fp + c.tn == int(n - labels.sum())
        assert min(c.tp, c.fp, c.tn, c.fn) >= 0


# ---------------------------------------------------------------- groups


def test_group_report_balanced_perfect():
    samples = _mk([0.9] * 10 + [0.1] * 10, [1] * 10 + [0] * 10)
    (rep,) = group_report(samples)
    assert rep.accuracy == 100.0 and rep.ap == 100.0
    assert rep.n_real == 10 and rep.n_fake == 10
    assert rep.confusion == ConfusionMatrix(tp=10, fp=0, tn=10, fn=0)


def test_group_report_fake_only_group():
    samples = _mk([0.9, 0.4], [1, 1], gen="faker")
    (rep,) = group_report(samples)
    assert rep.ap is None
    assert rep.accuracy == 50.0


def test_group_report_order_is_first_appearance():
    samples = _mk([0.9, 0.1], [1, 0], gen="b") + _mk([0.8, 0.2], [1, 0], gen="a")
    tags = [r.generator for r in group_report(samples)]
    assert tags == ["b", "a"]


# ---------------------------------------------------------------- means


def _report(tag, acc, ap):
    return GroupReport(tag, acc, ap, ConfusionMatrix(0, 0, 0, 0), 0, 0)


def test_mean_metrics_simple():
    macc, map_ = mean_metrics([_report("a", 90.0, None), _report("b", 92.0, None)])
    assert macc == 91.0 and map_ is None


def test_mean_metrics_single_tag_include():
    reports = [_report("a", 90.0, 95.0), _report("b", 70.0, 75.0)]
    macc, map_ = mean_metrics(reports, include=["b"])
    assert macc == 70.0 and map_ == 75.0


def test_mean_metrics_unknown_tag():
    with pytest.raises(UnknownTag):
        mean_metrics([_report("a", 90.0, None)], include=["zz"])


# Published per-generator rows for the stage-1 detector (accuracy / AP, %).
STAGE1_ACC = {
    "ADM": 92.71, "BigGAN": 95.83, "Glide": 92.74, "Midjourney": 88.49,
    "SDv1.5": 92.88, "VQDM": 85.53, "Flux": 90.84, "PixArt": 90.46,
    "SDv3": 91.00, "GPT-4o": 83.76, "Chameleon": 71.56,
}
STAGE1_AP = {
    "ADM": 97.96, "BigGAN": 98.98, "Glide": 97.94, "Midjourney": 96.31,
    "SDv1.5": 97.99, "VQDM": 95.56, "Flux": 97.56, "PixArt": 97.33,
    "SDv3": 97.56, "GPT-4o": None, "Chameleon": 72.39,
}
GENIMAGE_TAGS = ["ADM", "BigGAN", "Glide", "Midjourney", "SDv1.5", "VQDM"]


def test_mean_metrics_reproduces_published_aggregates():
    reports = [_report(t, STAGE1_ACC[t], STAGE1_AP[t]) for t in STAGE1_ACC]
    macc_gen, map_gen = mean_metrics(reports, include=GENIMAGE_TAGS)
    macc_all, map_all = mean_metrics(reports)
    assert abs(macc_gen - 91.36) <= 0.005
    assert abs(macc_all - 88.71) <= 0.005
    assert abs(map_all - 94.96) <= 0.005
    assert abs(map_gen - 97.46) <= 0.005
