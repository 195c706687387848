"""Conditional-gradient (Frank-Wolfe) optimization over the feasible confusion set.

The feasible confusion matrices of a distribution form a convex set, and the
confusion of a mixture of rules is the mixture of their confusions, so
maximizing a concave smoothed metric admits a conditional-gradient scheme
whose linear subproblem is solved exactly by a weighted-argmax rule with the
gradient as its gain matrix.

Two variants:

* ``idealized_cg`` works directly on a finite-support distribution with its
  true conditionals (exact confusions, exact linear maximization).
* ``bayescg`` works from a labeled sample: it fits (or is handed) a
  class-probability model on a train split and runs the same iteration
  against empirical confusions on the tune split.

Both return the final iterate in flattened form: after T steps with step
sizes 2/(j+1) the iterate is the mixture of the T linear maximizers with
weights 2j/(T(T+1)) (the initial rule's weight has vanished for T >= 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from confopt import _kernels
from confopt.confusion import (
    ClassifierRule,
    ConstantRule,
    GainMatrix,
    LabeledSample,
    MixtureRule,
    WeightedArgmaxRule,
    empirical_conf,
    exact_conf,
)
from confopt.cpe import CpeTrainConfig, train_cpe
from confopt.metrics import (
    SmoothedMetric,
    SmoothingConstants,
    eval_smoothed,
    grad_smoothed,
    metric_name,
)
from confopt.plugin import SplitConfig, split_sample
from confopt.synth import ExactEtaScorer, FiniteDistribution

__all__ = [
    "CgConfig",
    "CgTrace",
    "ensemble_weights",
    "exact_linear_max",
    "idealized_cg",
    "bayescg",
    "bayescg_from_parts",
    "cg_regret_bound",
    "nonsmooth_regret_bound",
]


@dataclass(frozen=True)
class CgConfig:
    """Iteration budget and sample handling for the conditional-gradient loops.

    ``iterations`` fixes T directly; when None, T = min(kappa * m, t_cap)
    with m the input sample size (bayescg only; idealized_cg has no sample
    and requires ``iterations``). ``alpha``/``seed`` control the bayescg
    train/tune split.
    """

    iterations: int | None = None
    kappa: int = 1
    t_cap: int = 5000
    alpha: float = 0.5
    seed: int = 0
    record_trace: bool = True
    initial_rule: ClassifierRule | None = None

    def __post_init__(self) -> None:
        if self.iterations is not None and self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.t_cap < 1:
            raise ValueError(f"t_cap must be >= 1, got {self.t_cap}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    def resolve_iterations(self, m: int | None) -> int:
        if self.iterations is not None:
            return self.iterations
        if m is None:
            raise ValueError("iterations must be set explicitly when no sample is given")
        return max(1, min(self.kappa * m, self.t_cap))


@dataclass
class CgTrace:
    """Per-iteration log: objective and gradient sup-norm at the pre-step iterate."""

    iteration: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    grad_linf: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, j: int, obj: float, linf: float) -> None:
        self.iteration.append(j)
        self.objective.append(obj)
        self.grad_linf.append(linf)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key in sorted(self.meta):
                fh.write(f"# {key}={self.meta[key]}\n")
            fh.write("iter,objective,grad_linf\n")
            for j, obj, linf in zip(self.iteration, self.objective, self.grad_linf):
                fh.write(f"{j},{obj:.12g},{linf:.12g}\n")


def ensemble_weights(iterations: int) -> np.ndarray:
    """Flattened mixture weights after T steps: 2j / (T (T+1)), j = 1..T."""
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    j = np.arange(1, iterations + 1, dtype=np.float64)
    return 2.0 * j / (iterations * (iterations + 1.0))


def exact_linear_max(gain: GainMatrix, dist: FiniteDistribution) -> WeightedArgmaxRule:
    """Rule maximizing <gain, conf(h, dist)> over all (randomized) rules.

    The objective is linear in the per-point outputs, so assigning each
    support point to the class with the best gain-weighted conditional score
    is exact; ties go to the larger class index.
    """
    if gain.n != dist.n:
        raise ValueError(f"gain has n={gain.n} but distribution has n={dist.n}")
    return WeightedArgmaxRule(gain, ExactEtaScorer(dist))


def _grad_at(sm: SmoothedMetric, conf: np.ndarray, j: int) -> GainMatrix:
    try:
        return grad_smoothed(sm, conf)
    except ValueError as exc:
        raise ValueError(f"gradient failed at iteration {j}: {exc}") from exc


def _finish(gains: list[np.ndarray], scorer, trace: CgTrace, sm: SmoothedMetric,
            final_obj: float) -> tuple[MixtureRule, CgTrace]:
    t = len(gains)
    comps = [WeightedArgmaxRule(GainMatrix(g), scorer) for g in gains]
    ensemble = MixtureRule(ensemble_weights(t), comps)
    trace.meta.setdefault("metric", metric_name(sm))
    trace.meta["iterations"] = t
    trace.meta["final_objective"] = f"{final_obj:.12g}"
    return ensemble, trace


def idealized_cg(
    dist: FiniteDistribution,
    sm: SmoothedMetric,
    config: CgConfig = CgConfig(),
) -> tuple[MixtureRule, CgTrace]:
    """Conditional gradient with exact confusions and exact linear steps."""
    iterations = config.resolve_iterations(None)
    scorer = ExactEtaScorer(dist)
    initial = config.initial_rule or ConstantRule(np.full(dist.n, 1.0 / dist.n))
    conf = exact_conf(initial, dist).entries.copy()
    weighted_etas = dist.etas * dist.masses[:, None]  # rows: q_k * eta_k
    trace = CgTrace()
    gains: list[np.ndarray] = []
    for j in range(1, iterations + 1):
        grad = _grad_at(sm, conf, j)
        if config.record_trace:
            trace.append(j, eval_smoothed(sm, conf), float(np.abs(grad.entries).max()))
        preds = _kernels.weighted_argmax_batch(dist.etas, grad.entries)
        conf_u = np.zeros_like(conf)
        np.add.at(conf_u.T, preds, weighted_etas)
        gamma = 2.0 / (j + 1.0)
        conf *= 1.0 - gamma
        conf += gamma * conf_u
        gains.append(grad.entries)
    return _finish(gains, scorer, trace, sm, eval_smoothed(sm, conf))


def bayescg_from_parts(
    scorer,
    tune: LabeledSample,
    sm: SmoothedMetric,
    iterations: int,
    *,
    initial_rule: ClassifierRule | None = None,
    record_trace: bool = True,
) -> tuple[MixtureRule, CgTrace]:
    """Conditional gradient against empirical confusions on a given tune split."""
    if scorer.n != tune.n:
        raise ValueError(f"scorer has n={scorer.n} but sample has n={tune.n}")
    n, m = tune.n, tune.m
    eta = scorer.predict_proba_batch(tune.features)
    label_idx = tune.label_indices
    initial = initial_rule or ConstantRule(np.full(n, 1.0 / n))
    conf = empirical_conf(initial, tune).entries.copy()
    trace = CgTrace()
    gains: list[np.ndarray] = []
    for j in range(1, iterations + 1):
        grad = _grad_at(sm, conf, j)
        if record_trace:
            trace.append(j, eval_smoothed(sm, conf), float(np.abs(grad.entries).max()))
        preds = _kernels.weighted_argmax_batch(eta, grad.entries)
        flat = np.bincount(label_idx * n + preds, minlength=n * n).astype(np.float64)
        conf_u = flat.reshape(n, n) / m
        gamma = 2.0 / (j + 1.0)
        conf *= 1.0 - gamma
        conf += gamma * conf_u
        gains.append(grad.entries)
    return _finish(gains, scorer, trace, sm, eval_smoothed(sm, conf))


def bayescg(
    sample: LabeledSample,
    sm: SmoothedMetric,
    config: CgConfig = CgConfig(),
    *,
    cpe_config: CpeTrainConfig | None = None,
    scorer=None,
) -> tuple[MixtureRule, CgTrace]:
    """Sample-based conditional gradient with a plug-in linear step.

    Splits the sample, fits the class-probability model on the train part
    (unless ``scorer`` is supplied), and runs T = ``config`` iterations of
    conditional gradient against the empirical confusion on the tune part;
    the linear step picks the weighted-argmax rule of the current gradient.
    """
    split = SplitConfig(alpha=config.alpha, seed=config.seed)
    s_train, s_tune = split_sample(sample, split)
    if scorer is None:
        scorer = train_cpe(s_train, cpe_config or CpeTrainConfig())
    iterations = config.resolve_iterations(sample.m)
    ensemble, trace = bayescg_from_parts(
        scorer,
        s_tune,
        sm,
        iterations,
        initial_rule=config.initial_rule,
        record_trace=config.record_trace,
    )
    trace.meta["alpha"] = config.alpha
    trace.meta["seed"] = config.seed
    return ensemble, trace


def cg_regret_bound(smoothness: float, iterations: int, epsilon: float = 0.0) -> float:
    """Optimization regret after T conditional-gradient steps.

    ``epsilon`` is the per-step additive error of the linear maximization;
    the bound is 2*epsilon + 8*smoothness / (T + 2).
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    return 2.0 * epsilon + 8.0 * smoothness / (iterations + 2.0)


def nonsmooth_regret_bound(
    constants: SmoothingConstants,
    *,
    cpe_l1: float,
    n: int,
    m: int,
    alpha: float,
    delta: float,
    iterations: int,
    complexity_const: float = 1.0,
) -> float:
    """End-to-end regret bound for the sample-based run on the plain metric.

    Adds the class-probability estimation term, the tune-split estimation
    term (``complexity_const`` is the distribution-free constant of the
    uniform-convergence step), the optimization term and twice the smoothing
    gap. Holds with probability 1 - delta over the tune split.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    m_tune = alpha * m
    if m_tune <= 1:
        raise ValueError(f"alpha*m must exceed 1, got {m_tune}")
    est = math.sqrt(
        (n * n * math.log(n) * math.log(m_tune) + math.log(n * n / delta)) / m_tune
    )
    return (
        4.0 * constants.lipschitz * cpe_l1
        + 4.0 * constants.smoothness * n * n * complexity_const * est
        + 8.0 * constants.smoothness / (iterations + 2.0)
        + 2.0 * constants.theta
    )
