"""confopt: learning and evaluating classifiers for confusion-matrix metrics.

The package covers the full loop for performance metrics that are general
functions of the multi-class confusion matrix: exact and empirical confusion
computation, a zoo of metrics with smoothed differentiable surrogates,
class-probability estimation, plug-in learners, conditional-gradient
optimizers, and grid/vertex search oracles for verifying optimality on
finite-support problems.
"""

from confopt._kernels import BACKEND as _KERNEL_BACKEND
from confopt.confusion import (
    ClassifierRule,
    ConfusionMatrix,
    ConstantRule,
    GainMatrix,
    LabeledSample,
    MixtureRule,
    WeightedArgmaxRule,
    empirical_conf,
    ensemble_predict,
    exact_conf,
    mix_conf,
)
from confopt.cg import (
    CgConfig,
    CgTrace,
    bayescg,
    bayescg_from_parts,
    cg_regret_bound,
    ensemble_weights,
    exact_linear_max,
    idealized_cg,
    nonsmooth_regret_bound,
)
from confopt.cpe import (
    CpeModel,
    CpeTrainConfig,
    l1_calibration_error,
    predict_proba,
    train_cpe,
)
from confopt.metrics import (
    MetricId,
    SmoothedMetric,
    SmoothingConstants,
    as_smoothed,
    eval_metric,
    eval_metric_array,
    eval_smoothed,
    grad_smoothed,
    metric_name,
    parse_metric,
    smoothing_constants,
    xi_constant,
)
from confopt.plugin import (
    BinaryThresholdRule,
    GainGridConfig,
    SplitConfig,
    binary_threshold_plugin,
    brute_force_plugin,
    split_sample,
    weighted_argmax_classifier,
)
from confopt.serialize import rule_from_json, rule_to_json
from confopt.synth import (
    ExactEtaScorer,
    FiniteDistribution,
    GaussianMixtureSpec,
    GaussianSynth,
    OracleResult,
    grid_oracle_optimum,
    longrun_cg_oracle,
    make_gaussian_synth,
    priors,
    regret,
    regret_with_flag,
    sample_from,
    vertex_oracle_optimum,
)

__version__ = "0.1.0"


def kernel_backend() -> str:
    """Name of the active low-level kernel backend: "cython" or "numpy"."""
    return _KERNEL_BACKEND
