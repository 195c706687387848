"""Plug-in learners: threshold search (binary) and gain-matrix grid search.

Both follow the same recipe: split the sample, fit a class-probability model
on the first part, then pick the decision rule whose empirical metric on the
second part is best. The binary learner sweeps scalar thresholds on the
estimated class-2 probability; the general learner sweeps a collection of
gain matrices applied through the weighted-argmax rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from confopt import _kernels
from confopt.confusion import (
    ClassifierRule,
    GainMatrix,
    LabeledSample,
    WeightedArgmaxRule,
)
from confopt.cpe import CpeModel, CpeTrainConfig, train_cpe
from confopt.metrics import (
    MetricId,
    SmoothedMetric,
    eval_metric_array,
    metric_name,
    satisfies_assumption_b,
)

__all__ = [
    "SplitConfig",
    "GainGridConfig",
    "split_sample",
    "weighted_argmax_classifier",
    "BinaryThresholdRule",
    "binary_threshold_plugin",
    "brute_force_plugin",
    "gain_candidates",
]


@dataclass(frozen=True)
class SplitConfig:
    """Train/tune split: |tune| = ceil(alpha * m), |train| = floor((1-alpha) * m)."""

    alpha: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class GainGridConfig:
    """Candidate gain matrices for the brute-force search."""

    per_entry_levels: int = 4
    max_candidates: int = 20_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.per_entry_levels < 2:
            raise ValueError(f"per_entry_levels must be >= 2, got {self.per_entry_levels}")
        if self.max_candidates < 1:
            raise ValueError(f"max_candidates must be >= 1, got {self.max_candidates}")


def split_sample(sample: LabeledSample, config: SplitConfig = SplitConfig()) -> tuple[LabeledSample, LabeledSample]:
    """Random disjoint (train, tune) split, deterministic in the seed."""
    m = sample.m
    m_train = math.floor((1.0 - config.alpha) * m)
    m_tune = m - m_train  # = ceil(alpha * m)
    if m_train == 0 or m_tune == 0:
        raise ValueError(f"split of {m} points at alpha={config.alpha} leaves an empty part")
    perm = np.random.default_rng(config.seed).permutation(m)
    return sample.subset(perm[:m_train]), sample.subset(perm[m_train:])


def weighted_argmax_classifier(gain: GainMatrix, scorer) -> WeightedArgmaxRule:
    """Plug-in rule: argmax over classes of (gain column y) . (estimated eta)."""
    return WeightedArgmaxRule(gain, scorer)


class BinaryThresholdRule(ClassifierRule):
    """Binary rule: predict class 2 when the estimated class-2 probability exceeds t."""

    def __init__(self, scorer, threshold: float):
        if scorer.n != 2:
            raise ValueError(f"threshold rule requires n=2, scorer has n={scorer.n}")
        if not (0.0 <= threshold <= 1.0):
            raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
        self.scorer = scorer
        self.threshold = float(threshold)
        self.n = 2

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        eta2 = self.scorer.predict_proba_batch(features)[:, 1]
        out = np.zeros((eta2.size, 2), dtype=np.float64)
        hot = (eta2 > self.threshold).astype(np.int64)
        out[np.arange(eta2.size), hot] = 1.0
        return out

    def __repr__(self) -> str:
        return f"BinaryThresholdRule(t={self.threshold:.6g})"


def _threshold_confusions(eta2: np.ndarray, label_idx: np.ndarray,
                          thresholds: np.ndarray) -> np.ndarray:
    """(C, 2, 2) empirical confusions of the rules 'predict 2 iff eta2 > t'."""
    m = eta2.size
    order = np.argsort(eta2, kind="stable")
    se = eta2[order]
    onehot = np.zeros((m, 2), dtype=np.float64)
    onehot[np.arange(m), label_idx[order]] = 1.0
    # suffix[i, c] = number of points with sorted index >= i and true class c.
    suffix = np.vstack([onehot[::-1].cumsum(axis=0)[::-1], np.zeros((1, 2))])
    totals = onehot.sum(axis=0)
    pos = np.searchsorted(se, thresholds, side="right")
    pred2 = suffix[pos]  # (C, 2)
    pred1 = totals[None, :] - pred2
    confs = np.stack([pred1, pred2], axis=2)  # (C, true class, predicted class)
    return confs / m


def binary_threshold_plugin(
    sample: LabeledSample,
    metric: MetricId | SmoothedMetric,
    split: SplitConfig = SplitConfig(),
    *,
    cpe_config: CpeTrainConfig | None = None,
    scorer=None,
) -> tuple[BinaryThresholdRule, float]:
    """Threshold plug-in learner for binary problems.

    Splits the sample, estimates class probabilities on the train part
    (unless an oracle ``scorer`` is supplied), and maximizes the empirical
    metric on the tune part over candidate thresholds: the midpoints between
    consecutive distinct estimated probabilities plus the endpoints 0 and 1.
    Metric ties resolve to the smaller threshold. The candidate set hits
    every achievable labeling of the tune part, so the search is exact.
    """
    if sample.n != 2:
        raise ValueError(f"binary threshold plug-in requires n=2, got n={sample.n}")
    s_train, s_tune = split_sample(sample, split)
    if scorer is None:
        scorer = train_cpe(s_train, cpe_config or CpeTrainConfig())
    eta2 = scorer.predict_proba_batch(s_tune.features)[:, 1]
    distinct = np.unique(eta2)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    cands = np.concatenate([[0.0], mids, [1.0]])
    confs = _threshold_confusions(eta2, s_tune.label_indices, cands)
    vals = eval_metric_array(metric, confs)
    vals = np.where(np.isnan(vals), -math.inf, vals)
    best = int(np.argmax(vals))  # first maximum = smallest threshold on ties
    if vals[best] == -math.inf:
        raise ValueError(f"metric '{metric_name(metric)}' undefined at every threshold")
    t = float(cands[best])
    return BinaryThresholdRule(scorer, t), t


def gain_candidates(n: int, config: GainGridConfig, assumption_b: bool) -> np.ndarray:
    """Candidate gain matrices, identity first.

    A structured per-entry grid is used when it fits in ``max_candidates``
    (diagonal entries over [0, 1] when the metric rewards diagonal mass,
    otherwise [-1, 1]; off-diagonal entries always over [-1, 1]); otherwise
    falls back to seeded uniform random matrices.
    """
    levels = config.per_entry_levels
    cells = n * n
    structured_size = levels**cells
    if structured_size <= config.max_candidates:
        offdiag_axis = np.linspace(-1.0, 1.0, levels)
        diag_axis = np.linspace(0.0, 1.0, levels) if assumption_b else offdiag_axis
        idx = np.stack(np.unravel_index(np.arange(structured_size), (levels,) * cells))
        grid = offdiag_axis[idx].T.reshape(structured_size, n, n)
        diag_cells = np.arange(n) * n + np.arange(n)
        grid.reshape(structured_size, cells)[:, diag_cells] = diag_axis[idx[diag_cells]].T
    else:
        rng = np.random.default_rng(config.seed)
        grid = rng.uniform(-1.0, 1.0, size=(config.max_candidates, n, n))
        if assumption_b:
            diag = rng.uniform(0.0, 1.0, size=(config.max_candidates, n))
            ii = np.arange(n)
            grid[:, ii, ii] = diag
    return np.concatenate([np.eye(n)[None], grid], axis=0)


def brute_force_plugin(
    sample: LabeledSample,
    metric: MetricId | SmoothedMetric,
    split: SplitConfig = SplitConfig(),
    grid: GainGridConfig = GainGridConfig(),
    *,
    cpe_config: CpeTrainConfig | None = None,
    scorer=None,
) -> tuple[WeightedArgmaxRule, GainMatrix]:
    """Gain-matrix grid search over weighted-argmax plug-in rules.

    Maximizes the empirical tune-part metric over the candidate set from
    ``gain_candidates``; ties go to the earliest candidate (the identity gain
    is always candidate 0).
    """
    s_train, s_tune = split_sample(sample, split)
    if scorer is None:
        scorer = train_cpe(s_train, cpe_config or CpeTrainConfig())
    if scorer.n != sample.n:
        raise ValueError(f"scorer has n={scorer.n} but sample has n={sample.n}")
    cands = gain_candidates(sample.n, grid, satisfies_assumption_b(metric))
    eta = scorer.predict_proba_batch(s_tune.features)
    confs = _kernels.per_gain_confusions(eta, s_tune.label_indices, cands)
    vals = eval_metric_array(metric, confs)
    vals = np.where(np.isnan(vals), -math.inf, vals)
    best = int(np.argmax(vals))
    if vals[best] == -math.inf:
        raise ValueError(f"metric '{metric_name(metric)}' undefined at every candidate")
    gain = GainMatrix(cands[best])
    return WeightedArgmaxRule(gain, scorer), gain
