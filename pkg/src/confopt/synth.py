"""Synthetic distributions and search oracles.

Two distribution families drive verification:

* ``FiniteDistribution``: a finite-support joint distribution given by
  support features, point masses and per-point conditional class
  probabilities. Everything about a classifier is exactly computable here,
  which is what the grid and vertex oracles exploit.
* ``GaussianMixtureSpec`` / ``GaussianSynth``: Gaussian class-conditionals
  with diagonal covariances; the posterior is available in closed form and
  (for shared covariances) is exactly an affine-score softmax.

The oracles bound the optimum of a metric over all classifiers:

* ``grid_oracle_optimum`` grids each support point's output distribution
  over the simplex (exact up to grid spacing; exact at n=2 for optima
  attained on the grid).
* ``vertex_oracle_optimum`` enumerates all deterministic labelings of the
  support.
* ``longrun_cg_oracle`` estimates the optimum of a continuous-distribution
  problem by running the idealized optimizer on a large exact-posterior
  surrogate sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from confopt.confusion import (
    MAX_CLASSES,
    VALIDATION_TOL,
    ConfusionMatrix,
    LabeledSample,
)
from confopt.metrics import MetricId, SmoothedMetric, eval_metric_array, metric_name

__all__ = [
    "FiniteDistribution",
    "ExactEtaScorer",
    "GaussianMixtureSpec",
    "GaussianSynth",
    "make_gaussian_synth",
    "sample_from",
    "priors",
    "OracleResult",
    "grid_oracle_optimum",
    "vertex_oracle_optimum",
    "longrun_cg_oracle",
    "regret",
    "regret_with_flag",
    "random_finite_distribution",
    "random_feasible_confusions",
]

GRID_SEARCH_LIMIT = 10**8
VERTEX_SEARCH_LIMIT = 10**7
_CHUNK = 100_000


@dataclass(frozen=True)
class FiniteDistribution:
    """Finite-support joint distribution over (features, class label)."""

    features: np.ndarray
    masses: np.ndarray
    etas: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.features, dtype=np.float64)
        q = np.asarray(self.masses, dtype=np.float64)
        eta = np.asarray(self.etas, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError(f"features must be a nonempty (K, d) array, got {x.shape}")
        k = x.shape[0]
        if q.shape != (k,):
            raise ValueError(f"masses shape {q.shape} does not match {k} support points")
        if eta.ndim != 2 or eta.shape[0] != k:
            raise ValueError(f"etas shape {eta.shape} does not match {k} support points")
        if eta.shape[1] > MAX_CLASSES:
            raise ValueError(f"{eta.shape[1]} classes exceeds maximum {MAX_CLASSES}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(q)) and np.all(np.isfinite(eta))):
            raise ValueError("distribution contains non-finite values")
        if np.any(q <= 0):
            i = int(np.flatnonzero(q <= 0)[0])
            raise ValueError(f"mass of support point {i} must be positive, got {q[i]}")
        if abs(float(q.sum()) - 1.0) > VALIDATION_TOL:
            raise ValueError(f"masses sum to {float(q.sum())}, expected 1")
        if np.any(eta < -VALIDATION_TOL):
            i, j = np.argwhere(eta < -VALIDATION_TOL)[0]
            raise ValueError(f"eta[{i},{j}] is negative: {eta[i, j]}")
        rowsum = eta.sum(axis=1)
        if np.any(np.abs(rowsum - 1.0) > VALIDATION_TOL):
            i = int(np.flatnonzero(np.abs(rowsum - 1.0) > VALIDATION_TOL)[0])
            raise ValueError(f"eta row {i} sums to {rowsum[i]}, expected 1")
        for name, arr in (("features", x), ("masses", q), ("etas", eta)):
            frozen = np.array(arr)
            frozen.setflags(write=False)
            object.__setattr__(self, name, frozen)

    @property
    def n(self) -> int:
        return self.etas.shape[1]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def support(self) -> int:
        return self.features.shape[0]

    @classmethod
    def from_etas(cls, masses, etas) -> "FiniteDistribution":
        """Build with the default one-hot feature encoding of support indices."""
        q = np.asarray(masses, dtype=np.float64)
        return cls(np.eye(q.size), q, np.asarray(etas, dtype=np.float64))

    def eta(self, features: np.ndarray) -> np.ndarray:
        """Conditional class probabilities at the nearest support points."""
        return ExactEtaScorer(self).predict_proba_batch(features)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "points": [
                {
                    "x": [float(v) for v in self.features[k]],
                    "q": float(self.masses[k]),
                    "eta": [float(v) for v in self.etas[k]],
                }
                for k in range(self.support)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FiniteDistribution":
        pts = doc["points"]
        x = np.asarray([p["x"] for p in pts], dtype=np.float64)
        q = np.asarray([p["q"] for p in pts], dtype=np.float64)
        eta = np.asarray([p["eta"] for p in pts], dtype=np.float64)
        out = cls(x, q, eta)
        if out.n != int(doc["n"]) or out.d != int(doc["d"]):
            raise ValueError("distribution header (n, d) disagrees with points")
        return out


class ExactEtaScorer:
    """Oracle scorer returning the true conditionals of a finite distribution.

    Feature vectors are matched to the nearest support point (samples drawn
    from the distribution carry exact copies of support features, so the
    match is exact there).
    """

    def __init__(self, dist: FiniteDistribution):
        self.dist = dist
        self.n = dist.n

    def predict_proba_batch(self, features: np.ndarray) -> np.ndarray:
        if features is self.dist.features:
            return self.dist.etas
        x = np.asarray(features, dtype=np.float64)
        support = self.dist.features
        d2 = ((x[:, None, :] - support[None, :, :]) ** 2).sum(axis=2)
        return self.dist.etas[np.argmin(d2, axis=1)]


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Gaussian class-conditionals with diagonal covariances."""

    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.priors, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        var = np.asarray(self.variances, dtype=np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ValueError(f"priors must be a vector of >= 2 classes, got {p.shape}")
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > VALIDATION_TOL:
            raise ValueError("priors must be nonnegative and sum to 1")
        n = p.size
        if mu.shape[0] != n or mu.ndim != 2:
            raise ValueError(f"means must be (n, d), got {mu.shape}")
        if var.shape != mu.shape:
            raise ValueError(f"variances shape {var.shape} must match means {mu.shape}")
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        for name, arr in (("priors", p), ("means", mu), ("variances", var)):
            frozen = np.array(arr)
            frozen.setflags(write=False)
            object.__setattr__(self, name, frozen)

    @property
    def n(self) -> int:
        return self.priors.size

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @classmethod
    def default(cls) -> "GaussianMixtureSpec":
        """Three equiprobable classes, unit-circle means, identity covariance."""
        angles = np.deg2rad([0.0, 120.0, 240.0])
        means = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return cls(np.full(3, 1.0 / 3.0), means, np.ones((3, 2)))

    def to_json(self) -> dict:
        return {
            "priors": [float(v) for v in self.priors],
            "means": [[float(v) for v in row] for row in self.means],
            "variances": [[float(v) for v in row] for row in self.variances],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GaussianMixtureSpec":
        return cls(
            np.asarray(doc["priors"], dtype=np.float64),
            np.asarray(doc["means"], dtype=np.float64),
            np.asarray(doc["variances"], dtype=np.float64),
        )


class GaussianSynth:
    """Sampler plus exact posterior for a Gaussian mixture spec."""

    def __init__(self, spec: GaussianMixtureSpec):
        self.spec = spec
        self.n = spec.n
        self.d = spec.d
        # Cache the log-density constants: -(1/2) sum_i log var_yi + log pi_y.
        with np.errstate(divide="ignore"):
            logp = np.where(spec.priors > 0, np.log(np.where(spec.priors > 0, spec.priors, 1.0)), -np.inf)
        self._log_const = logp - 0.5 * np.log(spec.variances).sum(axis=1)

    @property
    def priors(self) -> np.ndarray:
        return self.spec.priors

    def eta(self, features: np.ndarray) -> np.ndarray:
        """Exact posterior class probabilities for each feature row."""
        x = np.asarray(features, dtype=np.float64)
        diff = x[:, None, :] - self.spec.means[None, :, :]
        log_lik = self._log_const - 0.5 * (diff * diff / self.spec.variances[None, :, :]).sum(axis=2)
        log_lik -= log_lik.max(axis=1, keepdims=True)
        w = np.exp(log_lik)
        return w / w.sum(axis=1, keepdims=True)

    # Scorer protocol used by weighted-argmax rules.
    def predict_proba_batch(self, features: np.ndarray) -> np.ndarray:
        return self.eta(features)

    def sample(self, m: int, seed: int) -> LabeledSample:
        rng = np.random.default_rng(seed)
        labels = rng.choice(self.n, size=m, p=self.spec.priors)
        noise = rng.standard_normal((m, self.d))
        x = self.spec.means[labels] + noise * np.sqrt(self.spec.variances[labels])
        return LabeledSample(x, labels + 1, self.n)


def make_gaussian_synth(spec: GaussianMixtureSpec) -> GaussianSynth:
    return GaussianSynth(spec)


def sample_from(source, m: int, seed: int) -> LabeledSample:
    """Draw m labeled points from a distribution, deterministically in seed."""
    if m < 1:
        raise ValueError(f"sample size must be >= 1, got {m}")
    if isinstance(source, GaussianMixtureSpec):
        source = GaussianSynth(source)
    if isinstance(source, GaussianSynth):
        return source.sample(m, seed)
    if not isinstance(source, FiniteDistribution):
        raise TypeError(f"cannot sample from {type(source).__name__}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(source.support, size=m, p=source.masses)
    cum = np.cumsum(source.etas[idx], axis=1)
    u = rng.random(m)
    label_idx = np.minimum((cum < u[:, None]).sum(axis=1), source.n - 1)
    return LabeledSample(source.features[idx], label_idx + 1, source.n)


def priors(dist) -> np.ndarray:
    """Class priors of a distribution (row marginal of any feasible confusion)."""
    if isinstance(dist, FiniteDistribution):
        return dist.masses @ dist.etas
    if isinstance(dist, (GaussianSynth, GaussianMixtureSpec)):
        p = dist.priors if isinstance(dist, GaussianMixtureSpec) else dist.spec.priors
        return np.asarray(p, dtype=np.float64)
    raise TypeError(f"no priors for {type(dist).__name__}")


@dataclass(frozen=True)
class OracleResult:
    """Best metric value found by an oracle, with the matrix attaining it."""

    optimum_value: float
    optimum_conf: ConfusionMatrix
    method: str
    resolution: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "optimum_value": float(self.optimum_value),
            "method": self.method,
            "resolution": self.resolution,
            "optimum_conf": self.optimum_conf.to_json(),
        }


def _reject_degenerate_classes(dist: FiniteDistribution, metric) -> None:
    if isinstance(metric, SmoothedMetric):
        return
    if metric in (MetricId.HMEAN, MetricId.GMEAN):
        p = priors(dist)
        if np.any(p <= 0):
            i = int(np.flatnonzero(p <= 0)[0])
            raise ValueError(
                f"{metric.value} oracle rejects class with zero prior (class {i + 1})"
            )


def _simplex_grid(n: int, levels: int) -> np.ndarray:
    """All distributions over n classes on the grid with ``levels`` points per axis."""
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    steps = levels - 1
    if n == 1:
        return np.ones((1, 1), dtype=np.float64)
    rows = []
    for bars in combinations(range(steps + n - 1), n - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(steps + n - 2 - prev)
        rows.append(parts)
    return np.asarray(rows, dtype=np.float64) / steps


def _search_candidates(dist: FiniteDistribution, metric, cand: np.ndarray,
                       method: str, resolution: dict) -> OracleResult:
    """Maximize the metric over all assignments of candidate outputs to support points."""
    k = dist.support
    p = cand.shape[0]
    total = p**k
    best_val = -math.inf
    best_idx: int | None = None
    shape = (p,) * k
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        flat = np.arange(start, stop)
        multi = np.stack(np.unravel_index(flat, shape))  # (K, B)
        h = cand[multi]  # (K, B, n)
        confs = np.einsum("k,ki,kbj->bij", dist.masses, dist.etas, h, optimize=True)
        vals = eval_metric_array(metric, confs)
        vals = np.where(np.isnan(vals), -math.inf, vals)
        b = int(np.argmax(vals))
        if vals[b] > best_val:
            best_val = float(vals[b])
            best_idx = start + b
    if best_idx is None or best_val == -math.inf:
        raise ValueError(f"metric '{metric_name(metric)}' undefined at every search point")
    multi = np.unravel_index(best_idx, shape)
    h = cand[np.asarray(multi)]
    conf = np.einsum("k,ki,kj->ij", dist.masses, dist.etas, h)
    resolution = dict(resolution, combinations=total)
    return OracleResult(best_val, ConfusionMatrix(conf), method, resolution)


def grid_oracle_optimum(dist: FiniteDistribution, metric, levels: int) -> OracleResult:
    """Grid-search the best achievable metric value over randomized rules.

    Each support point's output distribution ranges over the simplex grid
    with ``levels`` points per free coordinate; the search covers all
    combinations, so its size levels^((n-1)*K) must stay within 1e8. Search
    points where the metric is undefined (ams without false-positive mass)
    are skipped.
    """
    _reject_degenerate_classes(dist, metric)
    size = levels ** ((dist.n - 1) * dist.support)
    if size > GRID_SEARCH_LIMIT:
        raise ValueError(
            f"grid search size {size} = {levels}^({dist.n - 1}*{dist.support}) "
            f"exceeds limit {GRID_SEARCH_LIMIT}"
        )
    cand = _simplex_grid(dist.n, levels)
    resolution = {
        "levels": levels,
        "spacing": 1.0 / (levels - 1),
        "per_point_candidates": int(cand.shape[0]),
    }
    return _search_candidates(dist, metric, cand, "grid", resolution)


def vertex_oracle_optimum(dist: FiniteDistribution, metric) -> OracleResult:
    """Exact best metric value over all deterministic labelings of the support."""
    _reject_degenerate_classes(dist, metric)
    size = dist.n**dist.support
    if size > VERTEX_SEARCH_LIMIT:
        raise ValueError(
            f"vertex search size {size} = {dist.n}^{dist.support} "
            f"exceeds limit {VERTEX_SEARCH_LIMIT}"
        )
    return _search_candidates(dist, metric, np.eye(dist.n), "exhaustive-vertex", {})


def longrun_cg_oracle(
    synth,
    metric,
    *,
    m: int = 100_000,
    iterations: int = 2000,
    rho: float | None = None,
    seed: int = 20_000,
) -> OracleResult:
    """Estimate the population optimum of a continuous-distribution problem.

    Draws a large sample, attaches the exact posterior at each point, and
    runs the idealized optimizer on that surrogate. The reported value is
    the plain (unsmoothed) metric at the surrogate confusion, a labeled
    estimate rather than an exact bound.
    """
    from confopt.cg import CgConfig, idealized_cg  # local import to avoid a cycle
    from confopt.confusion import exact_conf
    from confopt.metrics import as_smoothed

    sample = sample_from(synth, m, seed)
    surrogate = FiniteDistribution(
        sample.features, np.full(sample.m, 1.0 / sample.m), synth.eta(sample.features)
    )
    sm = as_smoothed(metric, rho)
    rule, _ = idealized_cg(surrogate, sm, CgConfig(iterations=iterations, record_trace=False))
    conf = exact_conf(rule, surrogate)
    value = float(eval_metric_array(sm.base, conf.entries))
    return OracleResult(
        value,
        conf,
        "long-run-cg",
        {"m": m, "iterations": iterations, "rho": sm.rho, "seed": seed},
    )


def regret(oracle: OracleResult, achieved: float) -> float:
    """Nonnegative shortfall of an achieved value against the oracle optimum."""
    return max(oracle.optimum_value - float(achieved), 0.0)


def regret_with_flag(oracle: OracleResult, achieved: float) -> tuple[float, bool]:
    """Regret plus a flag marking truncation (achieved beat the oracle value)."""
    gap = oracle.optimum_value - float(achieved)
    return max(gap, 0.0), gap < 0.0


def random_finite_distribution(
    n: int, support: int, seed: int, *, interior: float = 0.2
) -> FiniteDistribution:
    """Random finite-support distribution with conditionals pulled off the faces.

    ``interior`` in [0, 1) mixes each conditional with the uniform
    distribution, bounding every eta entry away from 0 by interior/n.
    """
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.full(support, 2.0))
    q = 0.9 * q + 0.1 / support
    etas = rng.dirichlet(np.full(n, 2.0), size=support)
    etas = (1.0 - interior) * etas + interior / n
    return FiniteDistribution.from_etas(q, etas)


def random_feasible_confusions(
    dist: FiniteDistribution, count: int, seed: int, *, concentration: float = 3.0
) -> np.ndarray:
    """Sample feasible confusion matrices of ``dist`` via random randomized rules.

    Returns a (count, n, n) stack; every matrix is conf(h, D) for an
    independently drawn rule h, so row sums equal the priors exactly.
    """
    rng = np.random.default_rng(seed)
    h = rng.dirichlet(np.full(dist.n, concentration), size=(count, dist.support))
    return np.einsum("k,ki,bkj->bij", dist.masses, dist.etas, h, optimize=True)
