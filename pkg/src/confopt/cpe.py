"""Class-probability estimation via regularized multinomial logistic regression.

The model is an affine-score softmax: scores W @ [x; 1] with W of shape
(n, d+1), trained by full-batch gradient descent with Armijo backtracking on
the mean negative log-likelihood plus an l2 penalty on the feature weights
(the bias column is left unpenalized so that, e.g., label-only structure is
fit exactly). Training is deterministic: zero initialization, fixed
summation order, no randomness anywhere.

Note on realizability: with Gaussian class-conditionals sharing one
covariance (the default synthetic family in ``confopt.synth``) the true
posterior is exactly an affine-score softmax, so the estimator is
well-specified there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from confopt.confusion import LabeledSample

__all__ = [
    "CpeTrainConfig",
    "CpeModel",
    "train_cpe",
    "predict_proba",
    "l1_calibration_error",
]


@dataclass(frozen=True)
class CpeTrainConfig:
    """Trainer knobs; defaults are sensible for small dense problems."""

    l2_penalty: float = 1e-4
    max_iters: int = 5000
    grad_tol: float = 1e-6
    init_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4

    def __post_init__(self) -> None:
        if self.l2_penalty < 0:
            raise ValueError(f"l2_penalty must be >= 0, got {self.l2_penalty}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.grad_tol <= 0:
            raise ValueError(f"grad_tol must be > 0, got {self.grad_tol}")
        if not (0 < self.shrink < 1):
            raise ValueError(f"shrink must lie in (0, 1), got {self.shrink}")
        if self.init_step <= 0 or self.sufficient_decrease <= 0:
            raise ValueError("init_step and sufficient_decrease must be > 0")


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


class CpeModel:
    """Affine-score softmax model over n classes and d features."""

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] < 2:
            raise ValueError(f"weights must be (n, d+1), got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite values")
        w = np.array(w)
        w.setflags(write=False)
        self.weights = w
        self.n = w.shape[0]
        self.d = w.shape[1] - 1

    def predict_proba_batch(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.d:
            raise ValueError(f"expected (m, {self.d}) features, got shape {x.shape}")
        scores = x @ self.weights[:, :-1].T + self.weights[:, -1]
        return _softmax(scores)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba_batch(np.asarray(x, dtype=np.float64)[None, :])[0]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "weights": [float(v) for v in self.weights.ravel()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CpeModel":
        n, d = int(doc["n"]), int(doc["d"])
        w = np.asarray(doc["weights"], dtype=np.float64).reshape(n, d + 1)
        return cls(w)


def predict_proba(model: CpeModel, x: np.ndarray) -> np.ndarray:
    """Estimated class probabilities for one feature vector."""
    return model.predict_proba(x)


def _objective_and_grad(w, x_aug, onehot, l2, d):
    m = x_aug.shape[0]
    scores = x_aug @ w.T
    smax = scores.max(axis=1, keepdims=True)
    shifted = scores - smax
    exps = np.exp(shifted)
    denom = exps.sum(axis=1, keepdims=True)
    lse = np.log(denom[:, 0]) + smax[:, 0]
    nll = float((lse - (scores * onehot).sum(axis=1)).mean())
    reg = 0.5 * l2 * float((w[:, :d] ** 2).sum())
    probs = exps / denom
    grad = (probs - onehot).T @ x_aug / m
    grad[:, :d] += l2 * w[:, :d]
    return nll + reg, grad


def _objective(w, x_aug, onehot, l2, d):
    m = x_aug.shape[0]
    scores = x_aug @ w.T
    smax = scores.max(axis=1)
    lse = np.log(np.exp(scores - smax[:, None]).sum(axis=1)) + smax
    nll = float((lse - (scores * onehot).sum(axis=1)).mean())
    return nll + 0.5 * l2 * float((w[:, :d] ** 2).sum())


def train_cpe(sample: LabeledSample, config: CpeTrainConfig = CpeTrainConfig()) -> CpeModel:
    """Fit the softmax model by full-batch descent with backtracking.

    The objective decreases monotonically; iteration stops when the gradient
    euclidean norm drops below ``grad_tol`` or after ``max_iters`` steps.
    """
    x = sample.features
    if not np.all(np.isfinite(x)):
        k = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
        raise ValueError(f"non-finite features at row {k}")
    m, d = x.shape
    n = sample.n
    x_aug = np.concatenate([x, np.ones((m, 1))], axis=1)
    onehot = np.zeros((m, n), dtype=np.float64)
    onehot[np.arange(m), sample.label_indices] = 1.0

    w = np.zeros((n, d + 1), dtype=np.float64)
    l2 = config.l2_penalty
    obj, grad = _objective_and_grad(w, x_aug, onehot, l2, d)
    for _ in range(config.max_iters):
        gnorm2 = float((grad * grad).sum())
        if np.sqrt(gnorm2) <= config.grad_tol:
            break
        step = config.init_step
        while True:
            trial = w - step * grad
            trial_obj = _objective(trial, x_aug, onehot, l2, d)
            if trial_obj <= obj - config.sufficient_decrease * step * gnorm2:
                break
            step *= config.shrink
            if step < 1e-20:
                # No descent step found; gradient is numerically flat.
                return CpeModel(w)
        w = trial
        obj, grad = _objective_and_grad(w, x_aug, onehot, l2, d)
    return CpeModel(w)


def l1_calibration_error(scorer, dist) -> float:
    """Mass-weighted l1 distance between estimated and true conditionals.

    ``dist`` is a finite-support distribution; the error is
    sum_k masses[k] * || scorer(x_k) - etas[k] ||_1.
    """
    est = scorer.predict_proba_batch(dist.features)
    gaps = np.abs(est - dist.etas).sum(axis=1)
    return float(dist.masses @ gaps)
