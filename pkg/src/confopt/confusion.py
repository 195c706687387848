"""Core types: class distributions, confusion matrices, classifier rules.

Conventions used across the package:

* Classes are labeled 1..n externally (samples, CSV files); array indices are
  0-based, so class y lives at index y-1.
* A classifier rule maps a feature vector to a distribution over the n
  classes (deterministic rules return one-hot vectors).
* ``conf(h, D)[i, j]`` is the joint probability that the true class is i+1
  and the rule predicts j+1, so the entries of a confusion matrix are
  nonnegative and sum to one, and row i sums to the prior of class i+1.
* Weighted-argmax rules break score ties toward the larger class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from confopt import _kernels

__all__ = [
    "MAX_CLASSES",
    "VALIDATION_TOL",
    "check_class_distribution",
    "ConfusionMatrix",
    "GainMatrix",
    "LabeledSample",
    "ClassifierRule",
    "ConstantRule",
    "WeightedArgmaxRule",
    "MixtureRule",
    "empirical_conf",
    "exact_conf",
    "mix_conf",
    "ensemble_predict",
]

MAX_CLASSES = 64
VALIDATION_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


def check_class_distribution(
    probs: Sequence[float] | np.ndarray,
    *,
    tol: float = VALIDATION_TOL,
    name: str = "distribution",
) -> np.ndarray:
    """Validate a probability vector and return it as float64.

    Entries must be >= -tol and the total must be within tol of 1. Raises
    ValueError naming the offending index.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d vector, got shape {p.shape}")
    if p.size > MAX_CLASSES:
        raise ValueError(f"{name} has {p.size} classes, maximum supported is {MAX_CLASSES}")
    if not np.all(np.isfinite(p)):
        i = int(np.flatnonzero(~np.isfinite(p))[0])
        raise ValueError(f"{name}[{i}] is not finite: {p[i]}")
    if np.any(p < -tol):
        i = int(np.flatnonzero(p < -tol)[0])
        raise ValueError(f"{name}[{i}] is negative: {p[i]}")
    total = float(p.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} sums to {total}, expected 1 within {tol}")
    return p


@dataclass(frozen=True)
class ConfusionMatrix:
    """Joint distribution of (true class, predicted class) as an n x n array."""

    entries: np.ndarray
    n: int = field(init=False)

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {e.shape}")
        n = e.shape[0]
        if n == 0 or n > MAX_CLASSES:
            raise ValueError(f"confusion matrix size {n} outside 1..{MAX_CLASSES}")
        if not np.all(np.isfinite(e)):
            i, j = np.argwhere(~np.isfinite(e))[0]
            raise ValueError(f"entry ({i},{j}) is not finite: {e[i, j]}")
        if np.any(e < -VALIDATION_TOL):
            i, j = np.argwhere(e < -VALIDATION_TOL)[0]
            raise ValueError(f"entry ({i},{j}) is negative: {e[i, j]}")
        total = float(e.sum())
        if abs(total - 1.0) > VALIDATION_TOL:
            raise ValueError(f"entries sum to {total}, expected 1 within {VALIDATION_TOL}")
        object.__setattr__(self, "entries", _frozen(e))
        object.__setattr__(self, "n", n)

    def row_sums(self) -> np.ndarray:
        """Row marginals; equal to the class priors for a feasible matrix."""
        return self.entries.sum(axis=1)

    def check_row_sums(self, priors: np.ndarray, tol: float = VALIDATION_TOL) -> None:
        gap = np.abs(self.row_sums() - np.asarray(priors, dtype=np.float64))
        if np.any(gap > tol):
            i = int(np.argmax(gap))
            raise ValueError(f"row {i} sums to {self.row_sums()[i]}, prior is {priors[i]}")

    def to_json(self) -> dict:
        return {"n": self.n, "entries": [float(v) for v in self.entries.ravel()]}

    @classmethod
    def from_json(cls, doc: dict) -> "ConfusionMatrix":
        n = int(doc["n"])
        entries = np.asarray(doc["entries"], dtype=np.float64).reshape(n, n)
        return cls(entries)


@dataclass(frozen=True)
class GainMatrix:
    """n x n gain matrix; column y scores class y in a weighted-argmax rule."""

    entries: np.ndarray
    n: int = field(init=False)

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"gain matrix must be square, got shape {e.shape}")
        n = e.shape[0]
        if n == 0 or n > MAX_CLASSES:
            raise ValueError(f"gain matrix size {n} outside 1..{MAX_CLASSES}")
        if not np.all(np.isfinite(e)):
            i, j = np.argwhere(~np.isfinite(e))[0]
            raise ValueError(f"entry ({i},{j}) is not finite: {e[i, j]}")
        object.__setattr__(self, "entries", _frozen(e))
        object.__setattr__(self, "n", n)

    def to_json(self) -> dict:
        return {"n": self.n, "entries": [float(v) for v in self.entries.ravel()]}

    @classmethod
    def from_json(cls, doc: dict) -> "GainMatrix":
        n = int(doc["n"])
        entries = np.asarray(doc["entries"], dtype=np.float64).reshape(n, n)
        return cls(entries)


@dataclass(frozen=True)
class LabeledSample:
    """Feature matrix plus labels in 1..n."""

    features: np.ndarray
    labels: np.ndarray
    n: int

    def __post_init__(self) -> None:
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {x.shape}")
        if x.shape[0] == 0:
            raise ValueError("empty sample")
        if y.shape != (x.shape[0],):
            raise ValueError(f"labels shape {y.shape} does not match {x.shape[0]} rows")
        if not np.issubdtype(y.dtype, np.integer):
            yf = np.asarray(y, dtype=np.float64)
            if np.any(yf != np.round(yf)):
                k = int(np.flatnonzero(yf != np.round(yf))[0])
                raise ValueError(f"invalid label at row {k}: {y[k]}")
            y = yf.astype(np.int64)
        y = y.astype(np.int64, copy=False)
        if self.n < 1 or self.n > MAX_CLASSES:
            raise ValueError(f"n={self.n} outside 1..{MAX_CLASSES}")
        bad = (y < 1) | (y > self.n)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise ValueError(f"invalid label at row {k}: {y[k]} not in 1..{self.n}")
        xf = np.array(x)
        xf.setflags(write=False)
        yf2 = np.array(y)
        yf2.setflags(write=False)
        object.__setattr__(self, "features", xf)
        object.__setattr__(self, "labels", yf2)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def label_indices(self) -> np.ndarray:
        """0-based class indices."""
        return self.labels - 1

    def subset(self, idx: np.ndarray) -> "LabeledSample":
        return LabeledSample(self.features[idx], self.labels[idx], self.n)


class ClassifierRule:
    """Base class for rules mapping features to class distributions.

    Subclasses implement ``predict_batch``; anything with the same two
    methods (and an ``n`` attribute) works in the confusion operations.
    """

    n: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Distribution over the n classes for one feature vector."""
        return self.predict_batch(np.asarray(x, dtype=np.float64)[None, :])[0]

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ConstantRule(ClassifierRule):
    """Ignores features and always outputs the same class distribution."""

    def __init__(self, dist: Sequence[float] | np.ndarray):
        self.dist = _frozen(check_class_distribution(dist, name="constant rule output"))
        self.n = self.dist.size

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        m = np.asarray(features).shape[0]
        return np.broadcast_to(self.dist, (m, self.n)).copy()

    def __repr__(self) -> str:
        return f"ConstantRule({np.array2string(self.dist, precision=4)})"


class WeightedArgmaxRule(ClassifierRule):
    """Deterministic rule: predict argmax_y of column scores g_y . eta(x).

    ``scorer`` supplies the class-probability estimates eta (any object with
    ``predict_proba_batch`` and ``n``). Ties go to the larger class index, and
    scaling the gain matrix by any positive constant leaves the rule
    unchanged.
    """

    def __init__(self, gain: GainMatrix, scorer):
        if gain.n != scorer.n:
            raise ValueError(f"gain has n={gain.n} but scorer has n={scorer.n}")
        self.gain = gain
        self.scorer = scorer
        self.n = gain.n

    def predict_indices(self, features: np.ndarray) -> np.ndarray:
        """0-based predicted class per row."""
        eta = self.scorer.predict_proba_batch(features)
        return _kernels.weighted_argmax_batch(eta, self.gain.entries)

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        idx = self.predict_indices(features)
        out = np.zeros((idx.size, self.n), dtype=np.float64)
        out[np.arange(idx.size), idx] = 1.0
        return out

    def __repr__(self) -> str:
        return f"WeightedArgmaxRule(n={self.n}, scorer={type(self.scorer).__name__})"


class MixtureRule(ClassifierRule):
    """Convex combination of rules; nested mixtures are flattened upfront."""

    def __init__(self, weights: Sequence[float] | np.ndarray, components: Sequence[ClassifierRule]):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size != len(components):
            raise ValueError(f"{w.size} weights for {len(components)} components")
        if w.size == 0:
            raise ValueError("mixture needs at least one component")
        if np.any(w < -VALIDATION_TOL):
            i = int(np.flatnonzero(w < -VALIDATION_TOL)[0])
            raise ValueError(f"weight[{i}] is negative: {w[i]}")
        total = float(w.sum())
        if abs(total - 1.0) > VALIDATION_TOL:
            raise ValueError(f"weights sum to {total}, expected 1 within {VALIDATION_TOL}")
        ns = {c.n for c in components}
        if len(ns) != 1:
            raise ValueError(f"components disagree on class count: {sorted(ns)}")
        flat_w: list[float] = []
        flat_c: list[ClassifierRule] = []
        for wi, comp in zip(w, components):
            if isinstance(comp, MixtureRule):
                flat_w.extend(wi * comp.weights)
                flat_c.extend(comp.components)
            else:
                flat_w.append(float(wi))
                flat_c.append(comp)
        self.weights = _frozen(np.asarray(flat_w))
        self.components: tuple[ClassifierRule, ...] = tuple(flat_c)
        self.n = next(iter(ns))

    def _shared_argmax_parts(self):
        """(scorer, gain stack, weights) when all parts share one scorer, else None."""
        if not self.components:
            return None
        first = self.components[0]
        if not isinstance(first, WeightedArgmaxRule):
            return None
        scorer = first.scorer
        for comp in self.components:
            if not isinstance(comp, WeightedArgmaxRule) or comp.scorer is not scorer:
                return None
        gains = np.stack([comp.gain.entries for comp in self.components])
        return scorer, gains, self.weights

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        shared = self._shared_argmax_parts()
        if shared is not None:
            scorer, gains, weights = shared
            eta = scorer.predict_proba_batch(features)
            return _kernels.mixture_predictions(eta, gains, weights)
        features = np.asarray(features, dtype=np.float64)
        out = np.zeros((features.shape[0], self.n), dtype=np.float64)
        for w, comp in zip(self.weights, self.components):
            out += w * comp.predict_batch(features)
        return out

    def __repr__(self) -> str:
        return f"MixtureRule({len(self.components)} components, n={self.n})"


def empirical_conf(rule: ClassifierRule, sample: LabeledSample) -> ConfusionMatrix:
    """Empirical confusion of ``rule`` on a labeled sample.

    Entry (i, j) is the average over sample points of (predicted probability
    of class j+1) restricted to points with true class i+1.
    """
    if rule.n != sample.n:
        raise ValueError(f"rule has n={rule.n} but sample has n={sample.n}")
    n, m = sample.n, sample.m
    idx = sample.label_indices
    if isinstance(rule, MixtureRule):
        shared = rule._shared_argmax_parts()
        if shared is not None:
            scorer, gains, weights = shared
            eta = scorer.predict_proba_batch(sample.features)
            confs = _kernels.per_gain_confusions(eta, idx, gains)
            return ConfusionMatrix(np.tensordot(weights, confs, axes=1))
    if isinstance(rule, WeightedArgmaxRule):
        preds = rule.predict_indices(sample.features)
        flat = np.bincount(idx * n + preds, minlength=n * n).astype(np.float64)
        return ConfusionMatrix(flat.reshape(n, n) / m)
    probs = rule.predict_batch(sample.features)
    out = np.zeros((n, n), dtype=np.float64)
    np.add.at(out, idx, probs)
    return ConfusionMatrix(out / m)


def exact_conf(rule: ClassifierRule, dist) -> ConfusionMatrix:
    """Population confusion of ``rule`` under a finite-support distribution.

    ``dist`` must expose ``features`` (K, d), ``masses`` (K,) and ``etas``
    (K, n); entry (i, j) is sum_k masses[k] * etas[k, i] * h(x_k)[j].
    """
    if rule.n != dist.n:
        raise ValueError(f"rule has n={rule.n} but distribution has n={dist.n}")
    probs = rule.predict_batch(dist.features)
    weighted = dist.etas * dist.masses[:, None]
    return ConfusionMatrix(weighted.T @ probs)


def mix_conf(parts: Sequence[tuple[float, ConfusionMatrix]]) -> ConfusionMatrix:
    """Convex combination of confusion matrices (the mixture law)."""
    if not parts:
        raise ValueError("mix_conf needs at least one component")
    weights = np.asarray([w for w, _ in parts], dtype=np.float64)
    if np.any(weights < -VALIDATION_TOL):
        i = int(np.flatnonzero(weights < -VALIDATION_TOL)[0])
        raise ValueError(f"weight[{i}] is negative: {weights[i]}")
    total = float(weights.sum())
    if abs(total - 1.0) > VALIDATION_TOL:
        raise ValueError(f"weights sum to {total}, expected 1 within {VALIDATION_TOL}")
    ns = {c.n for _, c in parts}
    if len(ns) != 1:
        raise ValueError(f"components disagree on class count: {sorted(ns)}")
    out = np.zeros((next(iter(ns)),) * 2, dtype=np.float64)
    for w, c in parts:
        out += w * c.entries
    return ConfusionMatrix(out)


def ensemble_predict(rule: ClassifierRule, x: np.ndarray) -> np.ndarray:
    """Class distribution assigned to one feature vector by any rule."""
    return rule.predict(x)
