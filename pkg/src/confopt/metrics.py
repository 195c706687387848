"""Performance metrics defined on confusion matrices.

Every metric here is a scalar function of the n x n joint confusion matrix
C (true class along rows, predicted class along columns). Three of the
concave metrics (harmonic, quadratic and geometric mean of recalls) also come
in a smoothed form with parameter rho > 0 that is differentiable on the whole
feasible set; ``grad_smoothed`` returns the exact gradient and
``smoothing_constants`` the approximation/Lipschitz/smoothness constants of
the surrogate.

Conventions
-----------
* Ratios evaluate 0/0 to 0 (a class that never occurs contributes a zero
  recall term rather than an error).
* Binary metrics (binary-f1, jaccard, ams) treat class 2 as the positive
  class and require n = 2.
* micro-f1 treats class 1 as the background class, so it reduces to
  binary-f1 at n = 2.
* ams is undefined when C[1, 2] = 0; the scalar evaluator raises and the
  array evaluator returns NaN there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from confopt.confusion import ConfusionMatrix, GainMatrix

__all__ = [
    "MetricId",
    "SmoothedMetric",
    "SmoothingConstants",
    "BINARY_ONLY",
    "SMOOTHABLE",
    "DEFAULT_RHO",
    "parse_metric",
    "metric_name",
    "as_smoothed",
    "eval_metric",
    "eval_metric_array",
    "eval_smoothed",
    "grad_smoothed",
    "smoothing_constants",
    "xi_constant",
    "satisfies_assumption_b",
]


class MetricId(enum.Enum):
    ACCURACY = "accuracy"
    AM = "am"
    BINARY_F1 = "binary-f1"
    JACCARD = "jaccard"
    AMS = "ams"
    MICRO_F1 = "micro-f1"
    MACRO_F1 = "macro-f1"
    HMEAN = "hmean"
    QMEAN = "qmean"
    GMEAN = "gmean"
    MINMAX = "minmax"


BINARY_ONLY = frozenset({MetricId.BINARY_F1, MetricId.JACCARD, MetricId.AMS})
SMOOTHABLE = frozenset({MetricId.HMEAN, MetricId.QMEAN, MetricId.GMEAN})

# Default smoothing when an algorithm needs a differentiable objective and the
# caller named a plain metric.
DEFAULT_RHO = {MetricId.HMEAN: 0.01, MetricId.QMEAN: 0.01, MetricId.GMEAN: 0.05}


@dataclass(frozen=True)
class SmoothedMetric:
    """A smoothable metric together with its smoothing parameter rho."""

    base: MetricId
    rho: float

    def __post_init__(self) -> None:
        if self.base not in SMOOTHABLE:
            raise ValueError(f"metric '{self.base.value}' has no smoothed form")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")


@dataclass(frozen=True)
class SmoothingConstants:
    """Approximation gap theta, Lipschitz constant and smoothness constant."""

    theta: float
    lipschitz: float
    smoothness: float


def parse_metric(text: str) -> MetricId | SmoothedMetric:
    """Parse names like ``"accuracy"``, ``"gmean"`` or ``"hmean:rho=0.01"``."""
    name, sep, rest = text.strip().lower().partition(":")
    try:
        base = MetricId(name)
    except ValueError:
        valid = ", ".join(m.value for m in MetricId)
        raise ValueError(f"unknown metric '{name}'; expected one of: {valid}") from None
    if not sep:
        return base
    if not rest.startswith("rho="):
        raise ValueError(f"bad metric suffix '{rest}'; expected 'rho=<value>'")
    return SmoothedMetric(base, float(rest[4:]))


def metric_name(metric: MetricId | SmoothedMetric) -> str:
    if isinstance(metric, SmoothedMetric):
        return f"{metric.base.value}:rho={metric.rho:g}"
    return metric.value


def as_smoothed(metric: MetricId | SmoothedMetric, rho: float | None = None) -> SmoothedMetric:
    """Promote a metric to its smoothed form, applying default rho if needed."""
    if isinstance(metric, SmoothedMetric):
        return metric if rho is None else SmoothedMetric(metric.base, rho)
    if metric not in SMOOTHABLE:
        raise ValueError(f"metric '{metric.value}' has no smoothed form")
    return SmoothedMetric(metric, DEFAULT_RHO[metric] if rho is None else rho)


def satisfies_assumption_b(metric: MetricId | SmoothedMetric) -> bool:
    """True when the metric rewards diagonal mass monotonically (all but minmax)."""
    base = metric.base if isinstance(metric, SmoothedMetric) else metric
    return base is not MetricId.MINMAX


def _entries(c) -> np.ndarray:
    if isinstance(c, ConfusionMatrix):
        return c.entries
    return np.asarray(c, dtype=np.float64)


def _check_square(e: np.ndarray) -> int:
    if e.ndim < 2 or e.shape[-1] != e.shape[-2]:
        raise ValueError(f"expected (..., n, n) confusion entries, got shape {e.shape}")
    return e.shape[-1]


def _tpr(e: np.ndarray) -> np.ndarray:
    """Per-class recalls with the 0/0 -> 0 convention, shape (..., n)."""
    rows = e.sum(axis=-1)
    diag = np.diagonal(e, axis1=-2, axis2=-1)
    return np.divide(diag, rows, out=np.zeros_like(rows), where=rows > 0)


def _fraction(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num/den with 0/0 -> 0. Assumes den >= 0 and den = 0 implies num = 0."""
    num = np.asarray(num, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def eval_metric_array(metric: MetricId | SmoothedMetric, entries: np.ndarray) -> np.ndarray:
    """Vectorized metric evaluation over a stack of confusion matrices.

    ``entries`` has shape (..., n, n); the result drops the last two axes.
    Follows the same conventions as ``eval_metric`` except that undefined ams
    points give NaN instead of raising (callers such as the search oracles
    skip them).
    """
    e = np.asarray(entries, dtype=np.float64)
    n = _check_square(e)
    if isinstance(metric, SmoothedMetric):
        return _eval_smoothed_array(metric, e)
    if metric in BINARY_ONLY and n != 2:
        raise ValueError(f"metric '{metric.value}' requires n=2, got n={n}")

    if metric is MetricId.ACCURACY:
        return np.diagonal(e, axis1=-2, axis2=-1).sum(axis=-1)
    if metric is MetricId.AM:
        return _tpr(e).mean(axis=-1)
    if metric is MetricId.BINARY_F1:
        tp = e[..., 1, 1]
        return _fraction(2.0 * tp, 2.0 * tp + e[..., 0, 1] + e[..., 1, 0])
    if metric is MetricId.JACCARD:
        tp = e[..., 1, 1]
        return _fraction(tp, tp + e[..., 1, 0] + e[..., 0, 1])
    if metric is MetricId.AMS:
        fp = e[..., 0, 1]
        tp = e[..., 1, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = 2.0 * ((fp + tp) * np.log1p(np.divide(tp, fp)) - tp)
        val = np.sqrt(np.clip(arg, 0.0, None))
        return np.where(fp > 0, val, np.nan)
    if metric is MetricId.MICRO_F1:
        diag = np.diagonal(e, axis1=-2, axis2=-1)
        fg = 2.0 * diag[..., 1:].sum(axis=-1)
        off = e.sum(axis=(-2, -1)) - diag.sum(axis=-1)
        return _fraction(fg, fg + off)
    if metric is MetricId.MACRO_F1:
        diag = np.diagonal(e, axis1=-2, axis2=-1)
        den = e.sum(axis=-1) + e.sum(axis=-2)
        return _fraction(2.0 * diag, den).mean(axis=-1)
    if metric is MetricId.HMEAN:
        rows = e.sum(axis=-1)
        diag = np.diagonal(e, axis1=-2, axis2=-1)
        terms = np.where(
            diag > 0,
            np.divide(rows, diag, out=np.ones_like(rows), where=diag > 0),
            np.where(rows > 0, np.inf, 0.0),
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            return n / terms.sum(axis=-1)
    if metric is MetricId.QMEAN:
        miss = 1.0 - _tpr(e)
        return 1.0 - np.sqrt(np.mean(miss * miss, axis=-1))
    if metric is MetricId.GMEAN:
        tpr = _tpr(e)
        safe = np.where(tpr > 0, tpr, 1.0)
        val = np.exp(np.mean(np.log(safe), axis=-1))
        return np.where(np.all(tpr > 0, axis=-1), val, 0.0)
    if metric is MetricId.MINMAX:
        return _tpr(e).min(axis=-1)
    raise ValueError(f"unhandled metric {metric}")


def _eval_smoothed_array(sm: SmoothedMetric, e: np.ndarray) -> np.ndarray:
    n = e.shape[-1]
    rho = sm.rho
    rows = e.sum(axis=-1)
    diag = np.diagonal(e, axis1=-2, axis2=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        if sm.base is MetricId.HMEAN:
            return n / ((rows + rho) / (diag + rho)).sum(axis=-1)
        if sm.base is MetricId.QMEAN:
            b = (rows - diag + rho) / (rows + rho)
            return 1.0 - np.sqrt(np.mean(b * b, axis=-1))
        ratio = (diag + rho) / (rows + rho)
        return np.exp(np.mean(np.log(ratio), axis=-1))


def eval_metric(metric: MetricId | SmoothedMetric, conf) -> float:
    """Evaluate a metric at one confusion matrix.

    Raises ValueError for binary-only metrics at n != 2, for ams at
    C[1, 2] = 0, and for smoothed metrics evaluated with rho = 0 at a
    boundary point where the surrogate is singular.
    """
    e = _entries(conf)
    n = _check_square(e)
    if e.ndim != 2:
        raise ValueError(f"expected one (n, n) matrix, got shape {e.shape}")
    if isinstance(metric, SmoothedMetric):
        return eval_smoothed(metric, conf)
    if metric in BINARY_ONLY and n != 2:
        raise ValueError(f"metric '{metric.value}' requires n=2, got n={n}")
    if metric is MetricId.AMS and e[0, 1] == 0.0:
        raise ValueError("ams is undefined at C[1,2] = 0 (no false-positive mass)")
    return float(eval_metric_array(metric, e))


def _check_smoothed_domain(sm: SmoothedMetric, e: np.ndarray) -> None:
    if sm.rho > 0:
        return
    rows = e.sum(axis=-1)
    diag = np.diagonal(e, axis1=-2, axis2=-1)
    if sm.base in (MetricId.HMEAN, MetricId.GMEAN):
        if np.any(diag <= 0):
            raise ValueError(f"{sm.base.value} surrogate is singular at rho=0 "
                             "with a zero diagonal entry")
    else:
        if np.any(rows <= 0):
            raise ValueError("qmean surrogate is singular at rho=0 with a zero row sum")


def eval_smoothed(sm: SmoothedMetric, conf) -> float:
    """Evaluate a smoothed surrogate at one confusion matrix."""
    e = _entries(conf)
    _check_square(e)
    if e.ndim != 2:
        raise ValueError(f"expected one (n, n) matrix, got shape {e.shape}")
    _check_smoothed_domain(sm, e)
    return float(_eval_smoothed_array(sm, e))


def grad_smoothed(sm: SmoothedMetric, conf) -> GainMatrix:
    """Exact gradient of the smoothed surrogate, as a gain matrix.

    The derivative with respect to entry (u, u') depends only on row u; the
    diagonal entries of the result are nonnegative and the off-diagonal ones
    nonpositive for all three surrogates.
    """
    e = _entries(conf)
    n = _check_square(e)
    if e.ndim != 2:
        raise ValueError(f"expected one (n, n) matrix, got shape {e.shape}")
    _check_smoothed_domain(sm, e)
    rho = sm.rho
    rows = e.sum(axis=-1)
    diag = np.diagonal(e, axis1=-2, axis2=-1)
    err = rows - diag

    if sm.base is MetricId.HMEAN:
        total = ((rows + rho) / (diag + rho)).sum()
        off_col = -n / ((diag + rho) * total * total)
        grad = np.tile(off_col[:, None], (1, n))
        np.fill_diagonal(grad, n * err / ((diag + rho) ** 2 * total * total))
        return GainMatrix(grad)

    if sm.base is MetricId.QMEAN:
        b = (err + rho) / (rows + rho)
        radius = math.sqrt(float((b * b).sum()))
        if radius == 0.0:
            raise ValueError("qmean surrogate is not differentiable here at rho=0 "
                             "(all error rates vanish)")
        scale = 1.0 / (math.sqrt(n) * radius)
        cube = (rows + rho) ** 3
        off_col = -scale * (err + rho) * diag / cube
        grad = np.tile(off_col[:, None], (1, n))
        np.fill_diagonal(grad, scale * (err + rho) ** 2 / cube)
        return GainMatrix(grad)

    # gmean: value P = prod((diag+rho)/(rows+rho))^(1/n); d/dC_uu' = -(P/n)/(rows_u+rho)
    # off the diagonal and (P/n) err_u / ((diag_u+rho)(rows_u+rho)) on it.
    value = float(np.exp(np.mean(np.log((diag + rho) / (rows + rho)))))
    off_col = -(value / n) / (rows + rho)
    grad = np.tile(off_col[:, None], (1, n))
    np.fill_diagonal(grad, (value / n) * err / ((diag + rho) * (rows + rho)))
    return GainMatrix(grad)


def smoothing_constants(sm: SmoothedMetric, pi_min: float, n: int) -> SmoothingConstants:
    """Constants of the smoothed surrogate at class count n.

    ``theta`` bounds |metric - surrogate| over feasible matrices whose
    smallest class prior is ``pi_min``; ``lipschitz`` and ``smoothness``
    bound the gradient sup-norm and its Lipschitz modulus (entrywise l1/linf
    pairing) over the whole feasible set.
    """
    if not (0.0 < pi_min <= 1.0):
        raise ValueError(f"pi_min must lie in (0, 1], got {pi_min}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rho = sm.rho
    if rho <= 0.0:
        raise ValueError("smoothing constants require rho > 0")
    if sm.base is MetricId.HMEAN:
        return SmoothingConstants(
            theta=(n / pi_min) * rho,
            lipschitz=n / rho,
            smoothness=2.0 * n / rho**2,
        )
    if sm.base is MetricId.QMEAN:
        rt = math.sqrt(n)
        return SmoothingConstants(
            theta=rho / (pi_min * rt),
            lipschitz=1.0 / (rt * rho),
            smoothness=(2.0 / rt) * (1.0 / rho**2) * (1.0 + 1.0 / rho),
        )
    return SmoothingConstants(
        theta=2.0 * rho ** (1.0 / n),
        lipschitz=(1.0 / n) * (1.0 / rho) * (1.0 + 1.0 / rho) ** (1.0 - 1.0 / n),
        smoothness=(1.0 / n**2) * (1.0 / rho**3) * (1.0 + 1.0 / rho) ** (1.0 - 2.0 / n),
    )


def xi_constant(metric: MetricId, priors: np.ndarray) -> float:
    """Plug-in regret constant for the three fractional-form binary metrics.

    The bound scales the conditional-probability estimation error; it is 1
    for ams, 1/pi_1 for binary-f1 and 1/(1 - pi_1) for micro-f1, with pi_1
    the prior of class 1.
    """
    p = np.asarray(priors, dtype=np.float64)
    if metric is MetricId.AMS:
        return 1.0
    if metric is MetricId.BINARY_F1:
        if p[0] <= 0:
            raise ValueError("binary-f1 constant requires a positive class-1 prior")
        return 1.0 / float(p[0])
    if metric is MetricId.MICRO_F1:
        if p[0] >= 1:
            raise ValueError("micro-f1 constant requires class-1 prior below 1")
        return 1.0 / (1.0 - float(p[0]))
    raise ValueError(f"no published xi constant for metric '{metric.value}'")
