"""Command-line interface.

Subcommands:

* ``train``: fit a classifier on a CSV dataset and save it as JSON.
* ``eval``: evaluate a saved classifier on a CSV dataset.
* ``experiment``: run a (sample size x seed) sweep from a JSON config and
  write a report CSV plus optimizer traces.
* ``gradcheck``: verify the smoothed-metric gradients against finite
  differences.
* ``oracle``: grid or vertex search on a finite-support distribution file.
* ``synth``: sample a CSV dataset from a distribution spec.

Exit codes: 0 success, 1 verification failure, 2 usage or compatibility
error, 3 I/O error.

Dataset CSV format: header ``f1,...,fd,label`` with labels as integers 1..n
(n inferred from the maximum label). All outputs are deterministic given the
inputs; ``--no-timestamp`` additionally omits the generated-at header and
wall-time measurements so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from confopt.cg import CgConfig, bayescg, idealized_cg
from confopt.confusion import ConfusionMatrix, LabeledSample, empirical_conf, exact_conf
from confopt.cpe import CpeTrainConfig
from confopt.metrics import (
    MetricId,
    SmoothedMetric,
    as_smoothed,
    eval_metric,
    grad_smoothed,
    metric_name,
    parse_metric,
)
from confopt.plugin import (
    GainGridConfig,
    SplitConfig,
    binary_threshold_plugin,
    brute_force_plugin,
    split_sample,
)
from confopt.serialize import rule_from_json, rule_to_json
from confopt.synth import (
    FiniteDistribution,
    GaussianMixtureSpec,
    GaussianSynth,
    grid_oracle_optimum,
    longrun_cg_oracle,
    random_feasible_confusions,
    random_finite_distribution,
    regret_with_flag,
    sample_from,
    vertex_oracle_optimum,
)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_IO = 3

SAMPLE_ALGOS = ("binary-plugin", "brute-plugin", "bayescg")
ALL_ALGOS = SAMPLE_ALGOS + ("idealized-cg",)


# ---------------------------------------------------------------------------
# dataset and model I/O


def load_dataset(path: str | Path) -> LabeledSample:
    """Read a ``f1,...,fd,label`` CSV; n is the maximum label seen."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty dataset file")
        header = [h.strip() for h in header]
        d = len(header) - 1
        expected = [f"f{i}" for i in range(1, d + 1)] + ["label"]
        if d < 1 or header != expected:
            raise ValueError(
                f"{path}: bad header {header!r}; expected f1,...,fd,label"
            )
        feats: list[list[float]] = []
        labels: list[int] = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ValueError(f"{path}:{row_no}: expected {d + 1} fields, got {len(row)}")
            feats.append([float(v) for v in row[:d]])
            labels.append(int(row[d]))
    if not feats:
        raise ValueError(f"{path}: empty sample")
    y = np.asarray(labels, dtype=np.int64)
    if y.min() < 1:
        raise ValueError(f"{path}: invalid label {y.min()} (labels start at 1)")
    return LabeledSample(np.asarray(feats, dtype=np.float64), y, int(y.max()))


def save_dataset(path: str | Path, sample: LabeledSample) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(1, sample.d + 1)] + ["label"])
        for x, y in zip(sample.features, sample.labels):
            writer.writerow([f"{v:.12g}" for v in x] + [int(y)])


def _load_json(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _dump_json(doc: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_distribution(doc: dict):
    """Build a FiniteDistribution or GaussianSynth from a JSON document."""
    kind = doc.get("kind", "finite" if "points" in doc else None)
    if kind == "finite" or "points" in doc:
        return FiniteDistribution.from_json(doc)
    if kind == "gaussian":
        if doc.get("preset") == "default":
            return GaussianSynth(GaussianMixtureSpec.default())
        return GaussianSynth(GaussianMixtureSpec.from_json(doc))
    raise ValueError(f"unknown distribution kind {kind!r}")


# ---------------------------------------------------------------------------
# train / eval


def _cpe_config(args) -> CpeTrainConfig:
    return CpeTrainConfig(
        l2_penalty=args.l2,
        max_iters=args.cpe_max_iters,
        grad_tol=args.cpe_grad_tol,
    )


def _train_rule(sample: LabeledSample, algo: str, metric, args):
    split = SplitConfig(alpha=args.alpha, seed=args.seed)
    cpe_cfg = _cpe_config(args)
    trace = None
    if algo == "binary-plugin":
        rule, threshold = binary_threshold_plugin(sample, metric, split, cpe_config=cpe_cfg)
        extra = {"threshold": threshold}
    elif algo == "brute-plugin":
        grid = GainGridConfig(
            per_entry_levels=args.levels,
            max_candidates=args.max_candidates,
            seed=args.seed,
        )
        rule, gain = brute_force_plugin(sample, metric, split, grid, cpe_config=cpe_cfg)
        extra = {"gain": gain.to_json()}
    elif algo == "bayescg":
        sm = as_smoothed(metric, args.rho)
        cfg = CgConfig(
            iterations=args.iterations,
            kappa=args.kappa,
            t_cap=args.t_cap,
            alpha=args.alpha,
            seed=args.seed,
        )
        rule, trace = bayescg(sample, sm, cfg, cpe_config=cpe_cfg)
        extra = {"iterations": len(rule.weights), "rho": sm.rho}
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    return rule, extra, trace


def cmd_train(args) -> int:
    metric = parse_metric(args.metric)
    if isinstance(metric, SmoothedMetric) and args.rho is not None:
        raise ValueError("give rho either in the metric name or the --rho flag, not both")
    sample = load_dataset(args.data)
    rule, extra, trace = _train_rule(sample, args.algo, metric, args)
    if args.trace:
        if trace is None:
            raise ValueError(f"--trace is only available for bayescg, not {args.algo}")
        trace.to_csv(args.trace)
    meta = {"algorithm": args.algo, "metric": args.metric, "seed": args.seed,
            "alpha": args.alpha, **extra}
    _dump_json(rule_to_json(rule, meta=meta), args.out)
    _, s_tune = split_sample(sample, SplitConfig(alpha=args.alpha, seed=args.seed))
    tune_value = eval_metric(metric, empirical_conf(rule, s_tune))
    print(f"trained {args.algo} on {sample.m} points (n={sample.n}); "
          f"tune-split {metric_name(metric)}={tune_value:.6f}; model -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    rule = rule_from_json(_load_json(args.model))
    sample = load_dataset(args.data)
    if sample.n > rule.n:
        raise ValueError(f"data has labels up to {sample.n} but the model has n={rule.n}")
    sample = LabeledSample(sample.features, sample.labels, rule.n)
    conf = empirical_conf(rule, sample)
    metrics = args.metric or ["accuracy"]
    out = {
        "m": sample.m,
        "confusion": conf.to_json(),
        "metrics": {name: eval_metric(parse_metric(name), conf) for name in metrics},
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment


def _resolve_rho(rho_spec, m: int) -> float | None:
    if rho_spec is None:
        return None
    if isinstance(rho_spec, (int, float)):
        return float(rho_spec)
    if isinstance(rho_spec, dict) and "power" in rho_spec:
        return float(rho_spec.get("scale", 1.0)) * float(m) ** float(rho_spec["power"])
    raise ValueError(f"bad rho spec {rho_spec!r}; use a number or {{\"power\": p}}")


def _validate_experiment(cfg: dict):
    """Parse and cross-check the config; returns the pieces needed to run."""
    algo = cfg.get("algorithm")
    if algo not in ALL_ALGOS:
        raise ValueError(f"algorithm must be one of {ALL_ALGOS}, got {algo!r}")
    metric = parse_metric(cfg["metric"])
    rho_spec = cfg.get("rho")
    if isinstance(metric, SmoothedMetric) and rho_spec is not None:
        raise ValueError("give rho either in the metric name or the rho field, not both")
    dist_doc = cfg["distribution"]
    if isinstance(dist_doc, str):
        dist_doc = _load_json(dist_doc)
    dist = load_distribution(dist_doc)
    sizes = cfg.get("sample_sizes")
    seeds = cfg.get("seeds")
    if not sizes or not seeds:
        raise ValueError("config needs nonempty sample_sizes and seeds")
    base = metric.base if isinstance(metric, SmoothedMetric) else metric
    if base in (MetricId.BINARY_F1, MetricId.JACCARD, MetricId.AMS) and dist.n != 2:
        raise ValueError(f"metric '{base.value}' requires n=2 but distribution has n={dist.n}")
    if algo == "binary-plugin" and dist.n != 2:
        raise ValueError(f"binary-plugin requires n=2 but distribution has n={dist.n}")
    if algo in ("bayescg", "idealized-cg"):
        # Must be smoothable; this raises for e.g. accuracy or minmax.
        as_smoothed(metric, _resolve_rho(rho_spec, int(sizes[0])))
    if algo == "idealized-cg" and not isinstance(dist, FiniteDistribution):
        raise ValueError("idealized-cg needs a finite-support distribution")
    for m in sizes:
        if int(m) < 2:
            raise ValueError(f"sample size {m} too small")
    return algo, metric, rho_spec, dist, [int(m) for m in sizes], [int(s) for s in seeds]


def _experiment_oracle(cfg: dict, dist, metric):
    """Oracle value for the run, or None with a reason string."""
    spec = cfg.get("oracle", "auto")
    if spec == "none" or (isinstance(spec, dict) and spec.get("method") == "none"):
        return None, "disabled"
    if spec == "auto":
        spec = {"method": "grid" if isinstance(dist, FiniteDistribution) else "long-run-cg"}
    method = spec.get("method")
    try:
        if method == "grid":
            return grid_oracle_optimum(dist, metric, int(spec.get("levels", 501))), ""
        if method == "vertex":
            return vertex_oracle_optimum(dist, metric), ""
        if method == "long-run-cg":
            return (
                longrun_cg_oracle(
                    dist,
                    metric,
                    m=int(spec.get("m", 100_000)),
                    iterations=int(spec.get("iterations", 2000)),
                    rho=spec.get("rho"),
                    seed=int(spec.get("seed", 20_000)),
                ),
                "",
            )
    except ValueError as exc:
        return None, f"skipped ({exc})"
    raise ValueError(f"unknown oracle method {method!r}")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def cmd_experiment(args) -> int:
    cfg = _load_json(args.config)
    algo, metric, rho_spec, dist, sizes, seeds = _validate_experiment(cfg)
    outdir = Path(cfg.get("output_dir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    write_traces = bool(cfg.get("traces", True)) and algo in ("bayescg", "idealized-cg")

    oracle, oracle_note = _experiment_oracle(cfg, dist, metric)
    holdout = None
    if not isinstance(dist, FiniteDistribution):
        holdout = sample_from(
            dist, int(cfg.get("holdout_m", 100_000)), int(cfg.get("holdout_seed", 999_983))
        )

    cpe_doc = cfg.get("cpe", {})
    cpe_cfg = CpeTrainConfig(
        l2_penalty=float(cpe_doc.get("l2_penalty", 1e-4)),
        max_iters=int(cpe_doc.get("max_iters", 5000)),
        grad_tol=float(cpe_doc.get("grad_tol", 1e-6)),
    )
    grid_doc = cfg.get("grid", {})
    alpha = float(cfg.get("alpha", 0.5))

    rows = []
    for m in sorted(sizes):
        for seed in sorted(seeds):
            start = time.perf_counter()
            rho = _resolve_rho(rho_spec, m)
            trace = None
            if algo == "idealized-cg":
                sm = as_smoothed(metric, rho)
                cg_cfg = CgConfig(
                    iterations=int(cfg.get("iterations") or min(int(cfg.get("kappa", 1)) * m, int(cfg.get("t_cap", 5000)))),
                    record_trace=write_traces,
                )
                rule, trace = idealized_cg(dist, sm, cg_cfg)
                tune_value = None
            else:
                sample = sample_from(dist, m, seed)
                split = SplitConfig(alpha=alpha, seed=seed)
                if algo == "binary-plugin":
                    rule, _ = binary_threshold_plugin(sample, metric, split, cpe_config=cpe_cfg)
                elif algo == "brute-plugin":
                    grid = GainGridConfig(
                        per_entry_levels=int(grid_doc.get("per_entry_levels", 4)),
                        max_candidates=int(grid_doc.get("max_candidates", 20_000)),
                        seed=seed,
                    )
                    rule, _ = brute_force_plugin(sample, metric, split, grid, cpe_config=cpe_cfg)
                else:
                    sm = as_smoothed(metric, rho)
                    cg_cfg = CgConfig(
                        iterations=cfg.get("iterations"),
                        kappa=int(cfg.get("kappa", 1)),
                        t_cap=int(cfg.get("t_cap", 5000)),
                        alpha=alpha,
                        seed=seed,
                        record_trace=write_traces,
                    )
                    rule, trace = bayescg(sample, sm, cg_cfg, cpe_config=cpe_cfg)
                _, s_tune = split_sample(sample, split)
                tune_value = eval_metric(metric, empirical_conf(rule, s_tune))
            if isinstance(dist, FiniteDistribution):
                value = eval_metric(metric, exact_conf(rule, dist))
                value_kind = "exact"
            else:
                value = eval_metric(metric, empirical_conf(rule, holdout))
                value_kind = "holdout-estimate"
            wall = time.perf_counter() - start

            trace_path = ""
            if trace is not None and write_traces:
                trace_path = f"trace_m{m}_seed{seed}.csv"
                trace.meta.update({"m": m, "seed": seed, "algorithm": algo})
                trace.to_csv(outdir / trace_path)

            reg, truncated = (None, None)
            if oracle is not None:
                reg, truncated = regret_with_flag(oracle, value)
            rows.append(
                {
                    "m": m,
                    "seed": seed,
                    "algorithm": algo,
                    "metric": metric_name(metric),
                    "rho": rho if algo in ("bayescg", "idealized-cg") else None,
                    "tune_value": tune_value,
                    "value": value,
                    "value_kind": value_kind,
                    "oracle_value": oracle.optimum_value if oracle else None,
                    "oracle_method": oracle.method if oracle else oracle_note,
                    "regret": reg,
                    "regret_truncated": truncated,
                    "wall_time_s": None if args.no_timestamp else wall,
                    "trace": trace_path,
                }
            )

    report = outdir / "report.csv"
    fields = list(rows[0].keys())
    with open(report, "w", newline="", encoding="utf-8") as fh:
        if not args.no_timestamp:
            fh.write(f"# generated {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fields])
    print(f"wrote {report} ({len(rows)} runs)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck / oracle / synth


def _fd_gradient(sm: SmoothedMetric, conf: np.ndarray, step: float) -> np.ndarray:
    from confopt.metrics import eval_smoothed

    out = np.zeros_like(conf)
    for i in range(conf.shape[0]):
        for j in range(conf.shape[1]):
            up = conf.copy()
            up[i, j] += step
            down = conf.copy()
            down[i, j] -= step
            out[i, j] = (eval_smoothed(sm, up) - eval_smoothed(sm, down)) / (2 * step)
    return out


def cmd_gradcheck(args) -> int:
    rhos = args.rho or [0.1, 0.01]
    classes = args.classes or [2, 4]
    worst_overall = 0.0
    print(f"{'metric':<8} {'rho':>6} {'n':>3} {'trials':>7} {'max rel err':>12}")
    for n in classes:
        dist = random_finite_distribution(n, 2 * n, seed=args.seed)
        confs = random_feasible_confusions(dist, args.trials, args.seed + 1, concentration=4.0)
        for base in (MetricId.HMEAN, MetricId.QMEAN, MetricId.GMEAN):
            for rho in rhos:
                sm = SmoothedMetric(base, rho)
                worst = 0.0
                for conf in confs:
                    analytic = grad_smoothed(sm, conf).entries
                    if args.inject_sign_flip:
                        analytic = -analytic
                    fd = _fd_gradient(sm, conf, args.step)
                    err = float(np.abs(analytic - fd).max() / max(np.abs(fd).max(), 1e-12))
                    worst = max(worst, err)
                worst_overall = max(worst_overall, worst)
                print(f"{base.value:<8} {rho:>6g} {n:>3d} {args.trials:>7d} {worst:>12.3e}")
    if worst_overall > args.tol:
        print(f"FAIL: max relative error {worst_overall:.3e} exceeds tolerance {args.tol:g}")
        return EXIT_VERIFICATION
    print(f"OK: max relative error {worst_overall:.3e} within tolerance {args.tol:g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    doc = _load_json(args.dist)
    dist = load_distribution(doc)
    if not isinstance(dist, FiniteDistribution):
        raise ValueError("oracle search needs a finite-support distribution")
    metric = parse_metric(args.metric)
    if args.method == "grid":
        res = grid_oracle_optimum(dist, metric, args.levels)
    else:
        res = vertex_oracle_optimum(dist, metric)
    json.dump(res.to_json(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.dist == "gaussian-default":
        source = GaussianSynth(GaussianMixtureSpec.default())
    else:
        source = load_distribution(_load_json(args.dist))
    sample = sample_from(source, args.m, args.seed)
    save_dataset(args.out, sample)
    print(f"wrote {args.out} ({sample.m} points, d={sample.d}, n={sample.n})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confopt",
        description="Train, evaluate and verify classifiers for confusion-matrix metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a classifier on a CSV dataset")
    p.add_argument("--algo", required=True, choices=SAMPLE_ALGOS)
    p.add_argument("--metric", required=True, help="e.g. qmean, accuracy, hmean:rho=0.01")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.5, help="tune-split fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=None, help="smoothing (bayescg)")
    p.add_argument("--iterations", type=int, default=None, help="fixed T (bayescg)")
    p.add_argument("--kappa", type=int, default=1, help="T = min(kappa*m, t-cap) (bayescg)")
    p.add_argument("--t-cap", type=int, default=5000)
    p.add_argument("--levels", type=int, default=4, help="per-entry grid levels (brute-plugin)")
    p.add_argument("--max-candidates", type=int, default=20_000)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--cpe-max-iters", type=int, default=5000)
    p.add_argument("--cpe-grad-tol", type=float, default=1e-6)
    p.add_argument("--trace", default=None, help="write the optimizer trace CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved classifier on a CSV dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metric", action="append", help="repeatable; default accuracy")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a config-driven sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the header timestamp and wall times (byte-identical reruns)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gradcheck", help="finite-difference check of smoothed gradients")
    p.add_argument("--rho", type=float, action="append")
    p.add_argument("--classes", type=int, action="append")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--inject-sign-flip", action="store_true",
                   help="test fixture: corrupt the gradient sign to prove detection")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("oracle", help="search the best achievable metric value")
    p.add_argument("--dist", required=True, help="finite-support distribution JSON")
    p.add_argument("--metric", required=True)
    p.add_argument("--method", choices=("grid", "vertex"), default="grid")
    p.add_argument("--levels", type=int, default=1001)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("synth", help="sample a CSV dataset from a distribution")
    p.add_argument("--dist", required=True,
                   help="'gaussian-default' or a distribution JSON file")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
