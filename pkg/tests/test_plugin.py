"""Tests for sample splitting and the two plug-in learners."""

import numpy as np
import pytest

from confopt.confusion import LabeledSample, empirical_conf
from confopt.metrics import MetricId, eval_metric, eval_metric_array
from confopt.plugin import (
    BinaryThresholdRule,
    GainGridConfig,
    SplitConfig,
    binary_threshold_plugin,
    brute_force_plugin,
    gain_candidates,
    split_sample,
)
from confopt.synth import (
    ExactEtaScorer,
    FiniteDistribution,
    random_finite_distribution,
    sample_from,
)


class TableScorer:
    def __init__(self, features, probs):
        self.features = np.asarray(features, dtype=np.float64)
        self.probs = np.asarray(probs, dtype=np.float64)
        self.n = self.probs.shape[1]

    def predict_proba_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.empty((x.shape[0], self.n))
        for r, row in enumerate(x):
            k = int(np.flatnonzero((self.features == row).all(axis=1))[0])
            out[r] = self.probs[k]
        return out


def test_split_sizes_are_floor_and_ceil():
    dist = random_finite_distribution(2, 3, seed=0)
    for m, alpha, want_train in ((10, 0.5, 5), (10, 0.3, 7), (5, 0.5, 2), (7, 0.25, 5)):
        sample = sample_from(dist, m, seed=1)
        s_train, s_tune = split_sample(sample, SplitConfig(alpha=alpha, seed=2))
        assert s_train.m == want_train
        assert s_tune.m == m - want_train


def test_split_partitions_the_sample():
    dist = random_finite_distribution(3, 4, seed=3)
    sample = sample_from(dist, 40, seed=4)
    marked = LabeledSample(
        np.hstack([sample.features, np.arange(40.0)[:, None]]), sample.labels, 3
    )
    s_train, s_tune = split_sample(marked, SplitConfig(alpha=0.4, seed=5))
    ids = np.concatenate([s_train.features[:, -1], s_tune.features[:, -1]])
    assert sorted(ids.tolist()) == list(range(40))


def test_split_is_seed_deterministic():
    dist = random_finite_distribution(2, 3, seed=6)
    sample = sample_from(dist, 30, seed=7)
    a = split_sample(sample, SplitConfig(seed=11))
    b = split_sample(sample, SplitConfig(seed=11))
    c = split_sample(sample, SplitConfig(seed=12))
    assert np.array_equal(a[0].features, b[0].features)
    assert not np.array_equal(a[0].features, c[0].features)


def test_split_rejects_empty_parts():
    dist = random_finite_distribution(2, 2, seed=8)
    sample = sample_from(dist, 1, seed=9)
    with pytest.raises(ValueError, match="empty part"):
        split_sample(sample, SplitConfig(alpha=0.5))
    with pytest.raises(ValueError):
        SplitConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SplitConfig(alpha=1.0)


def brute_grid_threshold_best(eta2, label_idx, metric, points=2001):
    """Reference: scan a dense uniform grid of thresholds by direct counting."""
    best = -np.inf
    for t in np.linspace(0.0, 1.0, points):
        conf = np.zeros((2, 2))
        pred = (eta2 > t).astype(np.int64)
        for y, p in zip(label_idx, pred):
            conf[y, p] += 1.0
        conf /= label_idx.size
        val = eval_metric_array(metric, conf)
        if not np.isnan(val) and val > best:
            best = float(val)
    return best


def test_threshold_search_matches_dense_grid_reference():
    for seed in range(3):
        dist = random_finite_distribution(2, 5, seed=400 + seed)
        sample = sample_from(dist, 60, seed=410 + seed)
        scorer = ExactEtaScorer(dist)
        split = SplitConfig(alpha=0.5, seed=seed)
        _, s_tune = split_sample(sample, split)
        eta2 = scorer.predict_proba_batch(s_tune.features)[:, 1]
        for metric in (MetricId.ACCURACY, MetricId.BINARY_F1):
            rule, _ = binary_threshold_plugin(sample, metric, split, scorer=scorer)
            got = eval_metric(metric, empirical_conf(rule, s_tune))
            want = brute_grid_threshold_best(eta2, s_tune.label_indices, metric)
            assert got >= want - 1e-15


def test_threshold_candidates_cover_every_labeling():
    # The midpoint candidate set induces exactly the suffix labelings of the
    # sorted distinct scores, which is every labeling a threshold can make.
    rng = np.random.default_rng(42)
    eta2 = np.round(rng.uniform(0.05, 0.95, size=12), 3)
    distinct = np.unique(eta2)
    mids = (distinct[:-1] + distinct[1:]) / 2
    cands = np.concatenate([[0.0], mids, [1.0]])
    labelings = {tuple((eta2 > t).astype(int)) for t in cands}
    want = {tuple((eta2 > t).astype(int)) for t in np.linspace(0, 1, 5001)}
    assert want <= labelings


def test_threshold_lands_midway_for_bayes_labels():
    # Scores split cleanly at 0.5 and labels follow the Bayes rule, so the
    # accuracy-optimal cut is any value in (0.45, 0.55); the plug-in returns
    # the midpoint of the straddling scores.
    values = np.array([0.1, 0.3, 0.45, 0.55, 0.7, 0.9])
    feats = np.repeat(values, 10)[:, None]
    labels = np.where(feats[:, 0] > 0.5, 2, 1).astype(np.int64)
    sample = LabeledSample(feats, labels, 2)
    grid = np.unique(feats[:, 0])[:, None]
    scorer = TableScorer(grid, np.column_stack([1 - grid[:, 0], grid[:, 0]]))
    rule, t = binary_threshold_plugin(sample, MetricId.ACCURACY,
                                      SplitConfig(alpha=0.5, seed=0), scorer=scorer)
    assert t == pytest.approx(0.5, abs=1e-12)
    assert isinstance(rule, BinaryThresholdRule)


def test_threshold_orientation_flip_relabels_classes():
    # Swapping the two class labels and the two probability columns yields a
    # learner that makes the mirrored prediction at every point.
    dist = random_finite_distribution(2, 6, seed=500)
    sample = sample_from(dist, 80, seed=501)
    scorer = ExactEtaScorer(dist)
    flipped_dist = FiniteDistribution(dist.features, dist.masses, dist.etas[:, ::-1].copy())
    flipped_scorer = ExactEtaScorer(flipped_dist)
    flipped_sample = LabeledSample(sample.features, (3 - sample.labels).astype(np.int64), 2)
    split = SplitConfig(alpha=0.5, seed=3)
    rule, _ = binary_threshold_plugin(sample, MetricId.ACCURACY, split, scorer=scorer)
    flipped_rule, _ = binary_threshold_plugin(
        flipped_sample, MetricId.ACCURACY, split, scorer=flipped_scorer
    )
    probs = rule.predict_batch(dist.features)
    flipped_probs = flipped_rule.predict_batch(dist.features)
    assert np.array_equal(probs, flipped_probs[:, ::-1])


def test_gain_candidates_structured_grid():
    cfg = GainGridConfig(per_entry_levels=3, max_candidates=20_000, seed=0)
    cands = gain_candidates(2, cfg, assumption_b=True)
    assert cands.shape == (3**4 + 1, 2, 2)
    assert np.array_equal(cands[0], np.eye(2))
    rest = cands[1:]
    ii = np.arange(2)
    assert rest[:, ii, ii].min() >= 0.0
    assert rest[:, ii, ii].max() <= 1.0
    assert rest[:, 0, 1].min() == -1.0 and rest[:, 0, 1].max() == 1.0
    # Structured grids enumerate every combination exactly once.
    flat = {tuple(g.ravel()) for g in rest}
    assert len(flat) == 3**4


def test_gain_candidates_random_fallback_is_seeded():
    cfg = GainGridConfig(per_entry_levels=6, max_candidates=100, seed=7)
    a = gain_candidates(3, cfg, assumption_b=False)
    b = gain_candidates(3, cfg, assumption_b=False)
    assert a.shape == (101, 3, 3)
    assert np.array_equal(a, b)
    c = gain_candidates(3, GainGridConfig(per_entry_levels=6, max_candidates=100, seed=8),
                        assumption_b=False)
    assert not np.array_equal(a, c)


def test_brute_plugin_beats_or_ties_identity_gain():
    dist = random_finite_distribution(3, 5, seed=600)
    sample = sample_from(dist, 120, seed=601)
    scorer = ExactEtaScorer(dist)
    split = SplitConfig(alpha=0.5, seed=0)
    rule, gain = brute_force_plugin(
        sample, MetricId.GMEAN, split,
        GainGridConfig(per_entry_levels=3, max_candidates=20_000, seed=0),
        scorer=scorer,
    )
    _, s_tune = split_sample(sample, split)
    from confopt.confusion import GainMatrix, WeightedArgmaxRule

    identity_rule = WeightedArgmaxRule(GainMatrix(np.eye(3)), scorer)
    got = eval_metric(MetricId.GMEAN, empirical_conf(rule, s_tune))
    base = eval_metric(MetricId.GMEAN, empirical_conf(identity_rule, s_tune))
    assert got >= base - 1e-15


def test_brute_plugin_deterministic_on_degenerate_instance():
    # One support point with a fifty-fifty posterior: every deterministic
    # weighted-argmax rule sends all mass to one predicted class, so one
    # true class never scores and the harmonic mean collapses to zero.
    feats = np.array([[0.0]])
    dist = FiniteDistribution(feats, np.array([1.0]), np.array([[0.5, 0.5]]))
    sample = sample_from(dist, 40, seed=700)
    rule, _ = brute_force_plugin(
        sample, MetricId.HMEAN, SplitConfig(alpha=0.5, seed=0),
        scorer=ExactEtaScorer(dist),
    )
    from confopt.confusion import exact_conf

    assert eval_metric(MetricId.HMEAN, exact_conf(rule, dist)) == 0.0


def test_binary_plugin_requires_two_classes():
    dist = random_finite_distribution(3, 4, seed=800)
    sample = sample_from(dist, 30, seed=801)
    with pytest.raises(ValueError, match="n=2"):
        binary_threshold_plugin(sample, MetricId.ACCURACY, scorer=ExactEtaScorer(dist))
