"""Command-line front end: simulate | fit | predict | evaluate | benchmark.

Each command reads a JSON pipeline config (schema below, unknown keys
rejected), writes its artifacts plus a MANIFEST.json into --out-dir, and
on failure emits a machine-readable error JSON on stderr with a nonzero
exit code.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import io, report
from .datagen import GenSpec, generate
from .evaluate import (
    as_complete,
    compare_joint_vs_univariate,
    emit_density_data,
    log_predictive_score,
    naive_impute,
    random_scan_efficiency,
)
from .gibbs import RunConfig, run_chain
from .model import CensoredDataset, ConfigError, PriorHyper, default_prior
from .predict import checkpoint_policy, predict_approximate, predict_exact

_GENSPEC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "n_test", "p"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "n_test": {"type": "integer", "minimum": 0},
        "p": {"type": "integer", "minimum": 1},
        "r": {"type": "integer", "minimum": 0},
        "block_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "block_rhos": {"type": "array", "items": {"type": "number"}},
        "sigma2": {"type": "number", "exclusiveMinimum": 0},
        "frac_insignificant": {"type": "number", "minimum": 0, "maximum": 1},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "target_censor_rate": {"type": "number"},
        "aux_share_range": {
            "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2,
        },
        "seed": {"type": "integer"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "generate": _GENSPEC_SCHEMA,
                "train": {"type": "string"},
                "test": {"type": "string"},
                "train_mask": {"type": "string"},
                "test_mask": {"type": "string"},
                "train_complete": {"type": "string"},
                "test_complete": {"type": "string"},
            },
        },
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tau_beta0": {"type": "number", "exclusiveMinimum": 0},
                "tau_beta": {"type": "number", "exclusiveMinimum": 0},
                "a": {"type": "number", "exclusiveMinimum": 0},
                "b": {"type": "number", "exclusiveMinimum": 0},
                "tau_gamma": {"type": "number", "exclusiveMinimum": 0},
                "kappa": {"type": "number"},
                "a_scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_iter": {"type": "integer", "minimum": 2},
                "burn_in": {"type": "integer", "minimum": 0},
                "thin": {"type": "integer", "minimum": 1},
                "scan_prob": {"type": "number"},
                "seed": {"type": "integer"},
                "exact_dim_cap": {"type": "integer", "minimum": 1},
                "store_imputations": {"type": "boolean"},
            },
        },
        "predict": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "strategy": {"enum": ["approximate", "exact"]},
                "checkpoint_ratio": {"type": "number", "minimum": 0},
                "rows": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "store": {"type": "string"},
            },
        },
        "evaluate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "methods": {
                    "type": "array",
                    "items": {"enum": ["bayesian", "naive", "complete"]},
                },
                "grid": {"type": "integer", "minimum": 8},
                "density_row": {"type": "integer", "minimum": 0},
            },
        },
        "benchmark": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["joint_vs_univariate", "random_scan", "both"]},
                "probs": {"type": "array", "items": {"type": "number"}},
            },
        },
    },
}


def load_config(path: str | Path) -> dict:
    """Parse and schema-validate a pipeline config; raises ConfigError."""
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(k) for k in exc.absolute_path) or "(top level)"
        raise ConfigError(f"config {path}: {exc.message} at {where}") from exc
    return cfg


def _run_config(cfg: dict, seed_override: int | None) -> RunConfig:
    run = dict(cfg.get("run", {}))
    if seed_override is not None:
        run["seed"] = seed_override
    return RunConfig(**run)


def _build_prior(cfg: dict, d: CensoredDataset) -> PriorHyper:
    m = float(np.var(d.y)) if d.y is not None and d.y.size else 1.0
    base = default_prior(d.p, m=max(m, 1e-12))
    spec = cfg.get("prior", {})
    if not spec:
        return base
    fields = {k: spec[k] for k in ("tau_beta0", "tau_beta", "a", "b", "tau_gamma", "kappa")
              if k in spec}
    a_mat = spec["a_scale"] * np.eye(d.p) if "a_scale" in spec else base.A
    return replace(base, A=a_mat, **fields)


def _load_train(cfg: dict, seed_override: int | None) -> CensoredDataset:
    data = cfg.get("data", {})
    if "train" in data:
        return io.read_dataset(data["train"], data.get("train_mask"))
    if "generate" in data:
        train, _, _ = _generated(cfg, seed_override)
        return train
    raise ConfigError("config needs data.train or data.generate")


def _load_test(cfg: dict, seed_override: int | None) -> CensoredDataset:
    data = cfg.get("data", {})
    if "test" in data:
        return io.read_dataset(data["test"], data.get("test_mask"))
    if "generate" in data:
        _, test, _ = _generated(cfg, seed_override)
        return test
    raise ConfigError("config needs data.test or data.generate")


def _generated(cfg: dict, seed_override: int | None):
    spec_dict = dict(cfg["data"]["generate"])
    if seed_override is not None:
        spec_dict["seed"] = seed_override
    if "aux_share_range" in spec_dict:
        spec_dict["aux_share_range"] = tuple(spec_dict["aux_share_range"])
    return generate(GenSpec(**spec_dict))


def cmd_simulate(cfg: dict, out_dir: Path, seed: int | None, threads: int) -> list[Path]:
    if "generate" not in cfg.get("data", {}):
        raise ConfigError("simulate requires data.generate")
    train, test, truth = _generated(cfg, seed)
    paths = []
    for name, d in (("train", train), ("test", test)):
        path = out_dir / f"{name}.csv"
        io.write_dataset(d, path)
        paths.append(path)
    for name, x, d in (("train_complete", truth.x_train, train),
                       ("test_complete", truth.x_test, test)):
        path = out_dir / f"{name}.csv"
        io.write_dataset(as_complete(d, x), path)
        paths.append(path)
    truth_path = out_dir / "truth.json"
    truth_path.write_text(json.dumps({
        "beta0": truth.params.beta0,
        "beta": truth.params.beta.tolist(),
        "sigma2": truth.params.sigma2,
        "gamma": truth.params.gamma.tolist(),
        "omega": truth.params.omega.tolist(),
        "delta": truth.delta,
        "r2": truth.r2,
    }, indent=2, sort_keys=True) + "\n")
    paths.append(truth_path)
    return paths


def cmd_fit(cfg: dict, out_dir: Path, seed: int | None, threads: int) -> list[Path]:
    train = _load_train(cfg, seed)
    prior = _build_prior(cfg, train)
    run_cfg = _run_config(cfg, seed)
    store = run_chain(train, prior, run_cfg, threads=threads)
    path = out_dir / "store.ndjson"
    io.write_store(store, path)
    return [path]


def _predict_rows(store, test, rows, threads):
    def one(row: int):
        return predict_approximate(store, test, row=row)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, rows))
    return [one(row) for row in rows]


def cmd_predict(cfg: dict, out_dir: Path, seed: int | None, threads: int) -> list[Path]:
    pcfg = cfg.get("predict", {})
    test = _load_test(cfg, seed)
    rows = pcfg.get("rows", list(range(test.n)))
    strategy = pcfg.get("strategy", "approximate")

    if strategy == "approximate":
        if "store" in pcfg:
            store = io.read_store(pcfg["store"])
        else:
            train = _load_train(cfg, seed)
            store = run_chain(train, _build_prior(cfg, train), _run_config(cfg, seed),
                              threads=threads)
        preds = _predict_rows(store, test, rows, threads)
    else:
        train = _load_train(cfg, seed)
        prior = _build_prior(cfg, train)
        run_cfg = _run_config(cfg, seed)
        ratio = pcfg.get("checkpoint_ratio", 1.0)
        if checkpoint_policy(train.n, len(rows), ratio) == "refit":
            preds = [predict_exact(train, test, row, prior, run_cfg) for row in rows]
        else:
            # seen test volume still below the refit threshold: reuse the
            # training-only posterior
            store = run_chain(train, prior, run_cfg, threads=threads)
            preds = _predict_rows(store, test, rows, threads)

    draw_rows = []
    summary_rows = []
    for row, pr in zip(rows, preds):
        for k, y in enumerate(pr.y_draws):
            draw_rows.append([row, k, float(y)])
        s = pr.summary()
        rec = [row, s["mean"], s["sd"], s["q05"], s["q50"], s["q95"]]
        if test.y is not None:
            rec.append(pr.log_density(float(test.y[row])))
        summary_rows.append(rec)
    paths = [out_dir / "predictions.csv", out_dir / "prediction_summary.csv"]
    io.write_csv(paths[0], ["row", "draw", "y"], draw_rows)
    header = ["row", "mean", "sd", "q05", "q50", "q95"]
    if test.y is not None:
        header.append("log_pred_density")
    io.write_csv(paths[1], header, summary_rows)
    return paths


def cmd_evaluate(cfg: dict, out_dir: Path, seed: int | None, threads: int) -> list[Path]:
    ecfg = cfg.get("evaluate", {})
    methods = ecfg.get("methods", ["bayesian", "naive"])
    grid = ecfg.get("grid", 256)
    density_row = ecfg.get("density_row", 0)

    train = _load_train(cfg, seed)
    test = _load_test(cfg, seed)
    if test.y is None:
        raise ConfigError("evaluate requires test responses")
    data = cfg.get("data", {})
    run_cfg = _run_config(cfg, seed)
    rows = list(range(test.n))

    variants = {}
    if "bayesian" in methods:
        variants["bayesian"] = (train, test)
    if "naive" in methods:
        variants["naive"] = (as_complete(train, naive_impute(train)),
                             as_complete(test, naive_impute(test)))
    if "complete" in methods:
        if "train_complete" in data:
            ctrain = io.read_dataset(data["train_complete"])
            ctest = io.read_dataset(data["test_complete"])
        elif "generate" in data:
            tr, te, truth = _generated(cfg, seed)
            ctrain, ctest = as_complete(tr, truth.x_train), as_complete(te, truth.x_test)
        else:
            raise ConfigError("method 'complete' needs complete-data files or data.generate")
        variants["complete"] = (ctrain, ctest)

    score_rows = []
    totals = {}
    density_curves = {}
    for method, (tr, te) in variants.items():
        store = run_chain(tr, _build_prior(cfg, tr), run_cfg, threads=threads)
        preds = _predict_rows(store, te, rows, threads)
        rep = log_predictive_score(preds, test.y, method_label=method)
        totals[method] = rep.total
        for row, sc in zip(rows, rep.per_row_log_scores):
            score_rows.append([method, row, float(sc)])
        density_curves[method] = emit_density_data(preds[density_row].y_draws, grid)

    paths = []
    scores_csv = out_dir / "scores.csv"
    io.write_csv(scores_csv, ["method", "row", "log_score"], score_rows)
    paths.append(scores_csv)
    scores_json = out_dir / "scores.json"
    scores_json.write_text(json.dumps({"totals": totals}, indent=2, sort_keys=True) + "\n")
    paths.append(scores_json)
    for method, (pts, dens) in density_curves.items():
        path = out_dir / f"density_{method}_row{density_row}.csv"
        io.write_csv(path, ["y", "density"], np.column_stack([pts, dens]).tolist())
        paths.append(path)
    paths.append(report.render_density_figure(
        density_curves, out_dir / "density.png",
        title=f"Predictive density, test row {density_row}",
        vline=float(test.y[density_row]),
    ))
    paths.append(report.render_score_figure(totals, out_dir / "scores.png"))
    return paths


def cmd_benchmark(cfg: dict, out_dir: Path, seed: int | None, threads: int) -> list[Path]:
    bcfg = cfg.get("benchmark", {})
    mode = bcfg.get("mode", "both")
    train = _load_train(cfg, seed)
    prior = _build_prior(cfg, train)
    run_cfg = _run_config(cfg, seed)
    paths = []

    if mode in ("joint_vs_univariate", "both"):
        comp = compare_joint_vs_univariate(train, prior, run_cfg)
        ratio_csv = out_dir / "ess_ratios.csv"
        io.write_csv(ratio_csv, ["entry", "ess_ratio"],
                     [[k, float(v)] for k, v in enumerate(comp.ratios)])
        paths.append(ratio_csv)
        quant_json = out_dir / "ess_quantiles.json"
        quant_json.write_text(json.dumps({
            "quantiles": comp.ratio_quantiles,
            "wall_time_ratio": comp.wall_time_ratio,
        }, indent=2, sort_keys=True) + "\n")
        paths.append(quant_json)
        paths.append(report.render_ess_ratio_figure(comp.ratios, out_dir / "ess_ratios.png"))

    if mode in ("random_scan", "both"):
        probs = bcfg.get("probs", [0.2, 0.5, 1.0])
        rows = random_scan_efficiency(train, prior, probs, run_cfg)
        scan_csv = out_dir / "scan_efficiency.csv"
        io.write_csv(
            scan_csv,
            ["scan_prob", "seconds_per_iteration", "beta_ess_per_sec_ratio",
             "imputation_ess_per_sec_ratio", "predictive_ess_per_sec_ratio"],
            [[r.scan_prob, r.seconds_per_iteration, r.beta_ess_per_sec_ratio,
              r.imputation_ess_per_sec_ratio, r.predictive_ess_per_sec_ratio]
             for r in rows],
        )
        paths.append(scan_csv)
        paths.append(report.render_scan_efficiency_figure(rows, out_dir / "scan_efficiency.png"))
    return paths


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="censreg",
        description="Bayesian regression with covariates censored at detection limits",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="pipeline config JSON")
        cmd.add_argument("--seed", type=int, default=None, help="overrides config seed")
        cmd.add_argument("--out-dir", required=True)
        cmd.add_argument("--threads", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        paths = _COMMANDS[args.command](cfg, out_dir, args.seed, args.threads)
        paths.append(io.write_manifest(out_dir, paths))
        return 0
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(json.dumps({
            "error": type(exc).__name__,
            "message": str(exc),
        }) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
