"""Report tables and figures: savings, daily profiles, load curves, metrics.

Everything is computed from a dataset slice plus trained estimator weights
and fitted analytical parameters; the rendering side writes deterministic
CSVs and PNG figures (Agg backend) to a directory."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import estimator
from .features import DEFAULT_SCHEMA, encode_records, measured_targets
from .power_model import (
    AAUState,
    AnalyticalParams,
    CarrierState,
    instantaneous_power,
    legacy_linear_model,
    reference_state,
    savings_fraction,
)
from .telemetry import Dataset, record_energy

#: Savings-table modes (name, state builder) evaluated at zero load.
SAVINGS_MODES = (
    "symbol_shutdown",
    "channel_shutdown_half",
    "carrier_shutdown_all",
    "deep_dormancy",
)


def _mode_state(params: AnalyticalParams, mode: str) -> AAUState:
    ref = reference_state(params)
    if mode == "symbol_shutdown":
        return AAUState(carriers=ref.carriers, m_active=ref.m_active, symbol_shutdown=True)
    if mode == "channel_shutdown_half":
        return AAUState(carriers=ref.carriers, m_active=ref.m_active // 2)
    if mode == "carrier_shutdown_all":
        off = tuple(
            CarrierState(active=False, prb_load=c.prb_load, p_max=c.p_max)
            for c in ref.carriers
        )
        return AAUState(carriers=off, m_active=0)
    if mode == "deep_dormancy":
        return AAUState(carriers=ref.carriers, m_active=0, dormant=True)
    raise ValueError(f"unknown savings mode {mode!r}")


def savings_table(params: AnalyticalParams):
    """Zero-load savings fraction of each energy-saving mode vs fully active."""
    return [(mode, savings_fraction(params, _mode_state(params, mode)))
            for mode in SAVINGS_MODES]


def naive_transmit_power(record) -> float:
    """Shutdown-unaware total transmit power: sum of p_max * prb_load."""
    return sum(c.p_max * load for c, load in zip(record.carriers, record.prb_load))


def fit_legacy_baseline(records):
    """Least-squares (static, slope) on rows without structural shutdowns.

    Mirrors how an affine load-proportional model would be calibrated when
    dormancy/carrier/channel shutdown are not in the telemetry it sees.
    Raises ValueError when the fit is impossible or degenerate.
    """
    rows = [
        r
        for r in records
        if r.dormancy_frac == 0.0
        and r.channel_off_frac == 0.0
        and all(v == 0.0 for v in r.carrier_off_frac)
    ]
    if len(rows) < 2:
        raise ValueError("too few shutdown-free rows to calibrate the legacy baseline")
    tx = np.array([naive_transmit_power(r) for r in rows])
    y = np.array([r.measured_power for r in rows])
    X = np.column_stack([np.ones_like(tx), tx])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    static, slope = float(coef[0]), float(coef[1])
    if static < 0 or slope <= 0:
        raise ValueError(
            f"legacy baseline degenerate (static {static:.4g}, slope {slope:.4g})"
        )
    return static, slope


@dataclass
class ReportBundle:
    """Everything cmd_report writes, in table form."""

    type_id: int
    aau_id: str
    savings: list
    profile_header: tuple
    profile_rows: list
    curve_header: tuple
    curve_rows: list
    metrics: dict
    legacy: dict | None


def build_report(
    dataset: Dataset,
    weights,
    normalizer,
    params: AnalyticalParams,
    type_id: int,
    aau_id: str | None = None,
    schema=DEFAULT_SCHEMA,
    coverage: float = 0.95,
) -> ReportBundle:
    """Assemble all report tables for one AAU type on a dataset slice."""
    entry = dataset.entry_for(type_id)
    records = [r for r in dataset.records if r.type_id == type_id]
    if not records:
        raise ValueError(f"dataset has no records of type {type_id}")
    if aau_id is None:
        aau_id = records[0].aau_id
    aau_records = [r for r in records if r.aau_id == aau_id]
    if not aau_records:
        raise ValueError(f"no records for AAU {aau_id!r} of type {type_id}")

    X = encode_records(records, normalizer, schema)
    means, stds = estimator.predict(weights, X)
    measured = measured_targets(records)
    analytical = np.array([record_energy(r, entry, params) for r in records])

    legacy = None
    legacy_pred = None
    try:
        static, slope = fit_legacy_baseline(records)
        legacy_pred = np.array(
            [legacy_linear_model(static, slope, naive_transmit_power(r)) for r in records]
        )
        night = np.array([r.dormancy_frac > 0.5 for r in records])
        legacy = {"static": static, "slope": slope}
        if night.any():
            legacy["night_overestimation_ratio"] = float(
                np.mean(legacy_pred[night] / measured[night])
            )
    except ValueError:
        legacy = None

    metrics = {
        "estimator_vs_measured": {
            "rmse": estimator.rmse(means, measured),
            "mae": estimator.mae(means, measured),
            "mape_pct": estimator.mape(means, measured),
            "coverage": estimator.calibration_coverage(means, stds, measured, coverage),
        },
        "analytical_vs_measured": {
            "rmse": estimator.rmse(analytical, measured),
            "mae": estimator.mae(analytical, measured),
            "mape_pct": estimator.mape(analytical, measured),
        },
        "analytical_vs_estimator": {
            "rmse": estimator.rmse(analytical, means),
            "mae": estimator.mae(analytical, means),
            "mape_pct": estimator.mape(analytical, means),
        },
    }
    if legacy_pred is not None:
        metrics["legacy_vs_measured"] = {
            "rmse": estimator.rmse(legacy_pred, measured),
            "mae": estimator.mae(legacy_pred, measured),
            "mape_pct": estimator.mape(legacy_pred, measured),
        }

    z = estimator.predict_interval(estimator.GaussianPrediction(0.0, 1.0), coverage)[1]
    index = {id(r): i for i, r in enumerate(records)}
    profile_rows = []
    for r in aau_records:
        i = index[id(r)]
        row = [
            r.timestamp,
            r.timestamp % 24,
            r.measured_power,
            float(means[i]),
            float(stds[i]),
            float(means[i] - z * stds[i]),
            float(means[i] + z * stds[i]),
            float(analytical[i]),
        ]
        if legacy_pred is not None:
            row.append(float(legacy_pred[i]))
        profile_rows.append(tuple(row))
    profile_header = (
        "timestamp", "hour", "measured", "est_mean", "est_std",
        "est_low", "est_high", "analytical",
    ) + (("legacy",) if legacy_pred is not None else ())

    order = np.argsort([np.mean(r.prb_load) for r in records], kind="stable")
    curve_rows = [
        (
            float(np.mean(records[i].prb_load)),
            float(measured[i]),
            float(means[i]),
            float(analytical[i]),
        )
        for i in order
    ]
    curve_header = ("mean_prb_load", "measured", "est_mean", "analytical")

    return ReportBundle(
        type_id=type_id,
        aau_id=aau_id,
        savings=savings_table(params),
        profile_header=profile_header,
        profile_rows=profile_rows,
        curve_header=curve_header,
        curve_rows=curve_rows,
        metrics=metrics,
        legacy=legacy,
    )


# --------------------------------------------------------------------------
# Writing


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _save(fig, path):
    fig.savefig(path, dpi=120, metadata={"Software": "aaupower"})
    plt.close(fig)


def _render_savings(bundle: ReportBundle, path) -> None:
    names = [m for m, _ in bundle.savings]
    vals = [s for _, s in bundle.savings]
    fig, ax = plt.subplots(figsize=(6.5, 3.5))
    ax.barh(names, vals, color="#3572b0")
    ax.set_xlabel("power saving vs fully active (fraction)")
    ax.set_xlim(0, 1)
    ax.grid(axis="x", alpha=0.3)
    for i, v in enumerate(vals):
        ax.text(v + 0.01, i, f"{v:.2f}", va="center", fontsize=9)
    ax.set_title(f"Energy-saving modes, type {bundle.type_id} (zero load)")
    fig.tight_layout()
    _save(fig, path)


def _render_profile(bundle: ReportBundle, path) -> None:
    rows = bundle.profile_rows
    ts = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(8.0, 4.0))
    ax.fill_between(ts, [r[5] for r in rows], [r[6] for r in rows],
                    alpha=0.25, color="#3572b0", label="estimator interval")
    ax.plot(ts, [r[3] for r in rows], color="#3572b0", label="estimator mean")
    ax.plot(ts, [r[7] for r in rows], "--", color="#2e8b57", label="analytical")
    if len(bundle.profile_header) > 8:
        ax.plot(ts, [r[8] for r in rows], ":", color="#b03535", label="legacy affine")
    ax.plot(ts, [r[2] for r in rows], ".", color="#333333", ms=4, label="measured")
    ax.set_xlabel("hour index")
    ax.set_ylabel("normalized power")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    ax.set_title(f"Hourly power, {bundle.aau_id}")
    fig.tight_layout()
    _save(fig, path)


def _render_curve(bundle: ReportBundle, path) -> None:
    rows = bundle.curve_rows
    load = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.plot(load, [r[1] for r in rows], ".", color="#777777", ms=3, label="measured")
    ax.plot(load, [r[2] for r in rows], ".", color="#3572b0", ms=3, label="estimator mean")
    ax.plot(load, [r[3] for r in rows], ".", color="#2e8b57", ms=3, label="analytical")
    ax.set_xlabel("mean PRB load")
    ax.set_ylabel("normalized power")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title(f"Power vs load, type {bundle.type_id}")
    fig.tight_layout()
    _save(fig, path)


def write_report(bundle: ReportBundle, out_dir) -> dict:
    """Write all report CSVs and figures; returns {name: path}."""
    paths = {}
    def p(name):
        paths[name] = os.path.join(str(out_dir), name)
        return paths[name]

    write_csv(p("savings.csv"), ("mode", "savings_fraction"), bundle.savings)
    write_csv(p("daily_profile.csv"), bundle.profile_header, bundle.profile_rows)
    write_csv(p("load_curve.csv"), bundle.curve_header, bundle.curve_rows)
    metric_rows = [
        (model, metric, value)
        for model, group in sorted(bundle.metrics.items())
        for metric, value in sorted(group.items())
    ]
    write_csv(p("metrics.csv"), ("comparison", "metric", "value"), metric_rows)
    _render_savings(bundle, p("savings.png"))
    _render_profile(bundle, p("daily_profile.png"))
    _render_curve(bundle, p("load_curve.png"))
    return paths
