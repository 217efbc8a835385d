"""Command-line pipeline: synth -> train -> eval -> distill -> predict -> report.

Every command takes ``--config`` (JSON file of option defaults), ``--seed``
and ``--out``, writes its artifacts into the output directory plus a
``<command>_summary.json`` with metrics, the seed, and a hash of the resolved
configuration.  Outputs are byte-identical across reruns with the same
inputs.

Exit codes: 0 success, 2 usage error, 3 missing input file, 4 schema or
validation failure, 5 numerical failure (divergence, non-convergence,
unidentifiable grid), 1 unexpected error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import estimator as est
from .distill import (
    ConvergenceError,
    IdentifiabilityError,
    distill_from_estimator,
    save_fit_result,
)
from .estimator import TrainConfig, TrainingDivergedError
from .features import (
    DEFAULT_SCHEMA,
    encode_records,
    fit_normalizer,
    load_normalizer,
    measured_targets,
    save_normalizer,
)
from .power_model import load_params, save_params
from .report import build_report, write_report
from .telemetry import (
    RecordValidationError,
    SchemaError,
    default_catalog,
    generate_synthetic_dataset,
    load_catalog,
    load_dataset,
    save_catalog,
    save_dataset,
    split_by_days,
)

DEFAULT_SEED = 7

_DEFAULTS = {
    "synth": {"aaus": 50, "days": 12, "noise_std": 0.02, "catalog": None},
    "train": {
        "data": None,
        "catalog": None,
        "train_days": 10,
        "test_days": 2,
        "iterations": TrainConfig.iterations,
        "learning_rate": TrainConfig.learning_rate,
        "batch_size": TrainConfig.batch_size,
        "hidden": "100,50",
    },
    "eval": {
        "data": None,
        "catalog": None,
        "weights": None,
        "normalizer": None,
        "train_days": 10,
        "test_days": 2,
        "coverage": 0.95,
    },
    "distill": {
        "weights": None,
        "normalizer": None,
        "catalog": None,
        "type_id": 0,
        "load_levels": 5,
    },
    "predict": {
        "data": None,
        "catalog": None,
        "weights": None,
        "normalizer": None,
        "coverage": 0.95,
    },
    "report": {
        "data": None,
        "catalog": None,
        "weights": None,
        "normalizer": None,
        "params": None,
        "type_id": 0,
        "aau": None,
        "train_days": 10,
        "test_days": 2,
        "coverage": 0.95,
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aaupower",
        description="AAU power modeling: synthesize telemetry, train the "
        "estimator, distill analytical parameters, and report.",
        epilog="exit codes: 0 ok, 2 usage, 3 missing file, 4 schema/validation, "
        "5 numerical failure, 1 unexpected",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with option defaults")
        p.add_argument("--seed", type=int, help=f"top-level seed (default {DEFAULT_SEED})")
        p.add_argument("--out", help="output directory (default ./out)")

    p = sub.add_parser("synth", help="generate synthetic telemetry CSV + catalog")
    common(p)
    p.add_argument("--aaus", type=int, help="number of AAUs (default 50)")
    p.add_argument("--days", type=int, help="number of days (default 12)")
    p.add_argument("--noise-std", dest="noise_std", type=float,
                   help="measurement noise std (default 0.02)")
    p.add_argument("--catalog", help="catalog JSON to draw types from (default: built-in)")

    p = sub.add_parser("train", help="fit the estimator on the train split")
    common(p)
    p.add_argument("--data", help="telemetry CSV")
    p.add_argument("--catalog", help="catalog JSON (default: catalog.json next to --data)")
    p.add_argument("--train-days", dest="train_days", type=int)
    p.add_argument("--test-days", dest="test_days", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--hidden", help="hidden layer sizes, e.g. '100,50'")

    p = sub.add_parser("eval", help="score the estimator on the held-out split")
    common(p)
    p.add_argument("--data", help="telemetry CSV")
    p.add_argument("--catalog")
    p.add_argument("--weights", help="weights JSON (from train)")
    p.add_argument("--normalizer", help="normalizer JSON (default: next to --weights)")
    p.add_argument("--train-days", dest="train_days", type=int)
    p.add_argument("--test-days", dest="test_days", type=int)
    p.add_argument("--coverage", type=float)

    p = sub.add_parser("distill", help="fit analytical params from the estimator")
    common(p)
    p.add_argument("--weights")
    p.add_argument("--normalizer")
    p.add_argument("--catalog")
    p.add_argument("--type-id", dest="type_id", type=int)
    p.add_argument("--load-levels", dest="load_levels", type=int)

    p = sub.add_parser("predict", help="per-record predictions with intervals")
    common(p)
    p.add_argument("--data")
    p.add_argument("--catalog")
    p.add_argument("--weights")
    p.add_argument("--normalizer")
    p.add_argument("--coverage", type=float)

    p = sub.add_parser("report", help="savings table, profiles, metrics, figures")
    common(p)
    p.add_argument("--data")
    p.add_argument("--catalog")
    p.add_argument("--weights")
    p.add_argument("--normalizer")
    p.add_argument("--params", help="analytical params JSON (from distill)")
    p.add_argument("--type-id", dest="type_id", type=int)
    p.add_argument("--aau", help="AAU id for the daily profile (default: first of the type)")
    p.add_argument("--train-days", dest="train_days", type=int)
    p.add_argument("--test-days", dest="test_days", type=int)
    p.add_argument("--coverage", type=float)

    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge CLI flags over config-file values over built-in defaults."""
    command = args.command
    cfg = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise SchemaError("config file must hold a JSON object")

    def from_cfg(name):
        section = cfg.get(command)
        if isinstance(section, dict) and name in section:
            return section[name]
        return cfg.get(name)

    options = {"command": command}
    defaults = dict(_DEFAULTS[command])
    defaults["seed"] = DEFAULT_SEED
    defaults["out"] = "out"
    for name, default in defaults.items():
        value = getattr(args, name, None)
        if value is None:
            value = from_cfg(name)
        if value is None:
            value = default
        options[name] = value
    return options


def config_hash(options: dict) -> str:
    raw = json.dumps(options, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()[:16]


def _require(options, *names):
    for name in names:
        if options.get(name) is None:
            raise SchemaError(f"--{name.replace('_', '-')} is required for {options['command']}")


def _sibling(path, filename):
    return os.path.join(os.path.dirname(os.path.abspath(str(path))), filename)


def _load_inputs(options, *, need_weights=True):
    """Shared loading for commands that consume data and/or weights."""
    loaded = {}
    if options.get("data") is not None:
        catalog_path = options.get("catalog") or _sibling(options["data"], "catalog.json")
        loaded["dataset"] = load_dataset(options["data"], catalog_path)
    if need_weights:
        _require(options, "weights")
        weights, schema_hash = est.load_weights(options["weights"])
        schema = DEFAULT_SCHEMA
        if schema_hash and schema_hash != schema.hash():
            raise SchemaError(
                f"weights were trained on feature layout {schema_hash}, "
                f"expected {schema.hash()}"
            )
        norm_path = options.get("normalizer") or _sibling(options["weights"], "normalizer.json")
        loaded["weights"] = weights
        loaded["normalizer"] = load_normalizer(norm_path)
        loaded["schema"] = schema
    return loaded


def write_summary(options: dict, artifacts: dict, metrics: dict) -> str:
    doc = {
        "command": options["command"],
        "seed": options["seed"],
        "config_hash": config_hash(options),
        "options": {k: v for k, v in options.items() if k != "command"},
        "artifacts": artifacts,
        "metrics": metrics,
    }
    path = os.path.join(str(options["out"]), f"{options['command']}_summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# --------------------------------------------------------------------------
# Commands


def cmd_synth(options) -> None:
    catalog = load_catalog(options["catalog"]) if options["catalog"] else default_catalog()
    dataset = generate_synthetic_dataset(
        catalog,
        num_aaus=int(options["aaus"]),
        num_days=int(options["days"]),
        seed=int(options["seed"]),
        noise_std=float(options["noise_std"]),
    )
    out = str(options["out"])
    csv_path = os.path.join(out, "telemetry.csv")
    cat_path = os.path.join(out, "catalog.json")
    save_dataset(dataset, csv_path, cat_path)
    write_summary(
        options,
        {"telemetry": csv_path, "catalog": cat_path},
        {
            "records": len(dataset.records),
            "csv_rows": sum(len(r.carriers) for r in dataset.records),
            "aaus": int(options["aaus"]),
            "days": int(options["days"]),
            "noise_std": float(options["noise_std"]),
        },
    )


def _parse_hidden(text) -> tuple:
    try:
        sizes = tuple(int(v) for v in str(text).split(",") if str(v).strip())
    except ValueError:
        raise SchemaError(f"bad --hidden value {text!r}; expected e.g. '100,50'") from None
    if not sizes or any(s < 1 for s in sizes):
        raise SchemaError(f"bad --hidden value {text!r}; sizes must be positive")
    return sizes


def cmd_train(options) -> None:
    _require(options, "data")
    loaded = _load_inputs(options, need_weights=False)
    dataset = loaded["dataset"]
    train_ds, test_ds = split_by_days(
        dataset, int(options["train_days"]), int(options["test_days"])
    )
    if not train_ds.records:
        raise RecordValidationError(["train split is empty"])
    schema = DEFAULT_SCHEMA
    normalizer = fit_normalizer(train_ds, schema)
    X = encode_records(train_ds.records, normalizer, schema)
    y = measured_targets(train_ds.records)
    seed = int(options["seed"])
    hidden = _parse_hidden(options["hidden"])
    weights0 = est.init_weights(seed, (schema.width, *hidden, 2))
    config = TrainConfig(
        iterations=int(options["iterations"]),
        learning_rate=float(options["learning_rate"]),
        batch_size=int(options["batch_size"]),
        seed=seed,
    )
    weights, trace = est.train(weights0, X, y, config)

    out = str(options["out"])
    weights_path = os.path.join(out, "weights.json")
    norm_path = os.path.join(out, "normalizer.json")
    est.save_weights(weights, weights_path, schema.hash())
    save_normalizer(normalizer, norm_path)

    metrics = {
        "n_train": len(train_ds.records),
        "n_test": len(test_ds.records),
        "final_nll": float(np.mean(trace[-min(50, len(trace)):])),
        "first_nll": float(trace[0]),
    }
    if test_ds.records:
        Xt = encode_records(test_ds.records, normalizer, schema)
        yt = measured_targets(test_ds.records)
        means, stds = est.predict(weights, Xt)
        metrics.update(
            {
                "test_rmse": est.rmse(means, yt),
                "test_mae": est.mae(means, yt),
                "test_mape_pct": est.mape(means, yt),
                "test_coverage_95": est.calibration_coverage(means, stds, yt, 0.95),
            }
        )
    write_summary(options, {"weights": weights_path, "normalizer": norm_path}, metrics)


def cmd_eval(options) -> None:
    _require(options, "data")
    loaded = _load_inputs(options)
    _, test_ds = split_by_days(
        loaded["dataset"], int(options["train_days"]), int(options["test_days"])
    )
    if not test_ds.records:
        raise RecordValidationError(["test split is empty"])
    X = encode_records(test_ds.records, loaded["normalizer"], loaded["schema"])
    y = measured_targets(test_ds.records)
    means, stds = est.predict(loaded["weights"], X)
    coverage = float(options["coverage"])
    metrics = {
        "n_test": len(test_ds.records),
        "rmse": est.rmse(means, y),
        "mae": est.mae(means, y),
        "mape_pct": est.mape(means, y),
        "coverage": est.calibration_coverage(means, stds, y, coverage),
        "coverage_level": coverage,
        "mean_predicted_std": float(np.mean(stds)),
    }
    write_summary(options, {}, metrics)


def cmd_distill(options) -> None:
    _require(options, "catalog")
    loaded = _load_inputs(options)
    catalog = load_catalog(options["catalog"])
    type_id = int(options["type_id"])
    entry = None
    for e in catalog:
        if e.type_id == type_id:
            entry = e
            break
    if entry is None:
        raise RecordValidationError([f"type_id {type_id} not in catalog"])

    result, grid, targets = distill_from_estimator(
        loaded["weights"],
        loaded["normalizer"],
        entry,
        load_levels=int(options["load_levels"]),
        schema=loaded["schema"],
    )
    out = str(options["out"])
    params_path = os.path.join(out, "params.json")
    fit_path = os.path.join(out, "fit_result.json")
    grid_path = os.path.join(out, "grid.csv")
    save_params(result.params, params_path)
    save_fit_result(result, fit_path)
    save_dataset(grid.to_dataset(targets), grid_path)
    write_summary(
        options,
        {"params": params_path, "fit_result": fit_path, "grid": grid_path},
        {
            "type_id": type_id,
            "grid_points": len(grid.points),
            "residual_norm": result.residual_norm,
            "iterations": result.iterations,
            "standard_errors": result.standard_errors,
        },
    )


def cmd_predict(options) -> None:
    _require(options, "data")
    loaded = _load_inputs(options)
    dataset = loaded["dataset"]
    if not dataset.records:
        raise RecordValidationError(["dataset is empty"])
    X = encode_records(dataset.records, loaded["normalizer"], loaded["schema"])
    means, stds = est.predict(loaded["weights"], X)
    coverage = float(options["coverage"])
    z_hi = est.predict_interval(est.GaussianPrediction(0.0, 1.0), coverage)[1]

    out = str(options["out"])
    pred_path = os.path.join(out, "predictions.csv")
    with open(pred_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ("timestamp", "aau_id", "measured_power", "mean", "std", "low", "high")
        )
        for rec, m, s in zip(dataset.records, means, stds):
            writer.writerow(
                [
                    rec.timestamp,
                    rec.aau_id,
                    repr(rec.measured_power),
                    repr(float(m)),
                    repr(float(s)),
                    repr(float(m - z_hi * s)),
                    repr(float(m + z_hi * s)),
                ]
            )
    y = measured_targets(dataset.records)
    metrics = {
        "n": len(dataset.records),
        "coverage_level": coverage,
        "observed_coverage": est.calibration_coverage(means, stds, y, coverage),
    }
    write_summary(options, {"predictions": pred_path}, metrics)


def cmd_report(options) -> None:
    _require(options, "data", "params")
    loaded = _load_inputs(options)
    params = load_params(options["params"])
    _, test_ds = split_by_days(
        loaded["dataset"], int(options["train_days"]), int(options["test_days"])
    )
    if not test_ds.records:
        raise RecordValidationError(["test split is empty"])
    bundle = build_report(
        test_ds,
        loaded["weights"],
        loaded["normalizer"],
        params,
        type_id=int(options["type_id"]),
        aau_id=options.get("aau"),
        schema=loaded["schema"],
        coverage=float(options["coverage"]),
    )
    paths = write_report(bundle, options["out"])
    write_summary(
        options,
        paths,
        {
            "type_id": bundle.type_id,
            "aau_id": bundle.aau_id,
            "savings": {mode: frac for mode, frac in bundle.savings},
            "metrics": bundle.metrics,
            "legacy": bundle.legacy,
        },
    )


_HANDLERS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "distill": cmd_distill,
    "predict": cmd_predict,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        options = resolve_options(args)
        os.makedirs(str(options["out"]), exist_ok=True)
        _HANDLERS[args.command](options)
        return 0
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 3
    except (TrainingDivergedError, ConvergenceError, IdentifiabilityError,
            np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 5
    except (SchemaError, RecordValidationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # pragma: no cover - last resort
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
