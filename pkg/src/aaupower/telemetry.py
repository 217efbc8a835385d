"""Hourly AAU telemetry: records, validation, synthesis, and CSV/JSON I/O.

A telemetry record summarizes one AAU-hour: per-carrier configuration and
PRB load, plus the fraction of the hour spent in each energy-saving mode.
Fractions compose hierarchically:

* ``dormancy_frac`` is an absolute share of the hour.
* Each carrier's ``carrier_off_frac`` is a share of the non-dormant
  remainder; carrier *i* is off during the first ``carrier_off_frac[i]`` of
  it (start-aligned prefixes, so low-priority carriers wake up later).
* Within every stretch that still has at least one active carrier,
  ``symbol_off_frac`` of the time is spent muted between transmissions and
  ``channel_off_frac`` of what is then left runs with half the RF chains.

The synthetic generator draws a sinusoidal-plus-jitter daily load profile,
applies threshold-triggered shutdowns (dormancy and full carrier sleep at
night, per-carrier trimming and chain reduction at low load, symbol muting
whenever load is below peak), and measures the analytical model exactly plus
optional Gaussian noise.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .power_model import (
    AAUState,
    AnalyticalParams,
    CarrierState,
    HourlyActivity,
    hourly_energy,
)
from .seeds import substream


class SchemaError(ValueError):
    """Structural problem in a telemetry file (header, row shape, grouping)."""


class RecordValidationError(ValueError):
    """One or more record invariants violated; ``errors`` names each one."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class CarrierConfig:
    """Static configuration of one carrier on an AAU."""

    frequency_mhz: float
    bandwidth_mhz: float
    p_max: float
    transceiver_index: int

    def to_json_dict(self) -> dict:
        return {
            "frequency_mhz": self.frequency_mhz,
            "bandwidth_mhz": self.bandwidth_mhz,
            "p_max": self.p_max,
            "transceiver_index": self.transceiver_index,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CarrierConfig":
        return cls(
            frequency_mhz=float(doc["frequency_mhz"]),
            bandwidth_mhz=float(doc["bandwidth_mhz"]),
            p_max=float(doc["p_max"]),
            transceiver_index=int(doc["transceiver_index"]),
        )


@dataclass(frozen=True)
class HourlyRecord:
    """One AAU-hour of telemetry.

    ``timestamp`` is an hour index (0-based, hour of day = timestamp % 24).
    Per-carrier tuples (``prb_load``, ``carrier_off_frac``) align with
    ``carriers``; the remaining fractions apply to the whole hour as
    described in the module docstring.
    """

    timestamp: int
    aau_id: str
    type_id: int
    carriers: tuple[CarrierConfig, ...]
    prb_load: tuple[float, ...]
    carrier_off_frac: tuple[float, ...]
    channel_off_frac: float
    symbol_off_frac: float
    dormancy_frac: float
    measured_power: float

    def __post_init__(self):
        object.__setattr__(self, "carriers", tuple(self.carriers))
        object.__setattr__(self, "prb_load", tuple(float(v) for v in self.prb_load))
        object.__setattr__(
            self, "carrier_off_frac", tuple(float(v) for v in self.carrier_off_frac)
        )


@dataclass(frozen=True)
class AAUCatalogEntry:
    """One AAU type: topology, canonical carrier configs, and true parameters."""

    type_id: int
    num_transceivers: int
    m_available: tuple[int, ...]
    max_carriers: int
    carrier_configs: tuple[CarrierConfig, ...]
    params: AnalyticalParams

    def __post_init__(self):
        object.__setattr__(self, "m_available", tuple(int(v) for v in self.m_available))
        object.__setattr__(self, "carrier_configs", tuple(self.carrier_configs))
        if self.type_id < 0:
            raise ValueError("type_id must be non-negative")
        if not 1 <= self.max_carriers <= 6:
            raise ValueError(f"max_carriers must be in [1, 6], got {self.max_carriers}")
        if self.num_transceivers != self.params.num_transceivers:
            raise ValueError("num_transceivers disagrees with params")
        if self.m_available != self.params.m_available:
            raise ValueError("m_available disagrees with params")
        if len(self.carrier_configs) != self.params.num_carriers:
            raise ValueError("carrier_configs must match the params carrier count")
        if len(self.carrier_configs) > self.max_carriers:
            raise ValueError("more configured carriers than max_carriers")
        for cfg in self.carrier_configs:
            if not 0 <= cfg.transceiver_index < self.num_transceivers:
                raise ValueError("carrier config references an unknown transceiver")

    def to_json_dict(self) -> dict:
        return {
            "type_id": self.type_id,
            "num_transceivers": self.num_transceivers,
            "m_available": list(self.m_available),
            "max_carriers": self.max_carriers,
            "carrier_configs": [c.to_json_dict() for c in self.carrier_configs],
            "params": self.params.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AAUCatalogEntry":
        return cls(
            type_id=int(doc["type_id"]),
            num_transceivers=int(doc["num_transceivers"]),
            m_available=tuple(int(v) for v in doc["m_available"]),
            max_carriers=int(doc["max_carriers"]),
            carrier_configs=tuple(
                CarrierConfig.from_json_dict(c) for c in doc["carrier_configs"]
            ),
            params=AnalyticalParams.from_json_dict(doc["params"]),
        )


@dataclass(frozen=True)
class Dataset:
    """A bundle of telemetry records plus the catalog they reference.

    Invariants (checked at construction): every record's type_id exists in
    the catalog, and per AAU the timestamps are strictly increasing (which
    also keeps the CSV grouping reversible).
    """

    records: tuple[HourlyRecord, ...]
    catalog: tuple[AAUCatalogEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "catalog", tuple(self.catalog))
        known = {e.type_id for e in self.catalog}
        last_ts: dict[str, int] = {}
        for rec in self.records:
            if rec.type_id not in known:
                raise ValueError(f"record references unknown type_id {rec.type_id}")
            prev = last_ts.get(rec.aau_id)
            if prev is not None and rec.timestamp <= prev:
                raise ValueError(
                    f"timestamps not strictly increasing for {rec.aau_id!r} "
                    f"({prev} then {rec.timestamp})"
                )
            last_ts[rec.aau_id] = rec.timestamp

    def entry_for(self, type_id: int) -> AAUCatalogEntry:
        for entry in self.catalog:
            if entry.type_id == type_id:
                return entry
        raise KeyError(f"type_id {type_id} not in catalog")

    @property
    def num_days(self) -> int:
        if not self.records:
            return 0
        return max(rec.timestamp for rec in self.records) // 24 + 1


# --------------------------------------------------------------------------
# Validation


def record_errors(record: HourlyRecord, catalog) -> list:
    """Collect every violated record invariant (empty list means valid)."""
    errors = []
    entry = None
    for e in catalog:
        if e.type_id == record.type_id:
            entry = e
            break
    if entry is None:
        errors.append(f"unknown type_id {record.type_id}")

    n = len(record.carriers)
    if n < 1:
        errors.append("record has no carriers")
    if entry is not None:
        if n > entry.max_carriers:
            errors.append(
                f"carrier count {n} exceeds max_carriers {entry.max_carriers}"
            )
        if n != len(entry.carrier_configs):
            errors.append(
                f"carrier count {n} does not match the type's configured "
                f"{len(entry.carrier_configs)}"
            )
        for i, cfg in enumerate(record.carriers):
            if not 0 <= cfg.transceiver_index < entry.num_transceivers:
                errors.append(f"carrier {i} references unknown transceiver")

    if record.timestamp < 0:
        errors.append(f"timestamp must be non-negative, got {record.timestamp}")
    if len(record.prb_load) != n:
        errors.append("prb_load length does not match carrier count")
    if len(record.carrier_off_frac) != n:
        errors.append("carrier_off_frac length does not match carrier count")

    for i, v in enumerate(record.prb_load):
        if not 0.0 <= v <= 1.0:
            errors.append(f"prb_load[{i}] out of [0, 1]: {v}")
    for i, v in enumerate(record.carrier_off_frac):
        if not 0.0 <= v <= 1.0:
            errors.append(f"carrier_off_frac[{i}] out of [0, 1]: {v}")
    for name in ("channel_off_frac", "symbol_off_frac", "dormancy_frac"):
        v = getattr(record, name)
        if not 0.0 <= v <= 1.0:
            errors.append(f"{name} out of [0, 1]: {v}")
    for i, cfg in enumerate(record.carriers):
        if cfg.frequency_mhz <= 0:
            errors.append(f"carrier {i} frequency must be positive")
        if cfg.bandwidth_mhz <= 0:
            errors.append(f"carrier {i} bandwidth must be positive")
        if cfg.p_max < 0:
            errors.append(f"carrier {i} p_max must be non-negative")
    if not math.isfinite(record.measured_power) or record.measured_power < 0:
        errors.append("measured_power must be finite and non-negative")

    if not errors and entry is not None:
        # Fractions in range and lengths consistent: the hour must decompose
        # into segments that sum to one.
        try:
            activity_from_record(record, entry)
        except ValueError as exc:  # pragma: no cover - defensive
            errors.append(f"activity decomposition failed: {exc}")
    return errors


def validate_record(record: HourlyRecord, catalog) -> HourlyRecord:
    """Return ``record`` iff all invariants hold.

    Raises:
        RecordValidationError: naming every violated invariant.
    """
    errors = record_errors(record, catalog)
    if errors:
        raise RecordValidationError(errors)
    return record


# --------------------------------------------------------------------------
# Record -> activity conversion


def activity_from_record(record: HourlyRecord, entry: AAUCatalogEntry) -> HourlyActivity:
    """Decompose an hourly record into piecewise-constant operating points.

    Follows the hierarchical fraction semantics from the module docstring.
    Chain reduction (channel shutdown) runs at ``floor(M/2)`` chains where
    ``M = max(entry.m_available)``.
    """
    m_full = max(entry.m_available)
    m_half = m_full // 2

    def carrier_states(flags):
        return tuple(
            CarrierState(active=bool(flags[i]), prb_load=record.prb_load[i],
                         p_max=record.carriers[i].p_max)
            for i in range(len(record.carriers))
        )

    segments = []
    dorm = record.dormancy_frac
    if dorm > 0.0:
        segments.append(
            (AAUState(carriers=carrier_states([False] * len(record.carriers)),
                      m_active=0, dormant=True), dorm)
        )
    remainder = 1.0 - dorm
    if remainder > 0.0:
        offs = record.carrier_off_frac
        cuts = sorted({0.0, 1.0, *offs})
        for a, b in zip(cuts, cuts[1:]):
            span = (b - a) * remainder
            if span <= 0.0:
                continue
            flags = [off <= a for off in offs]
            states = carrier_states(flags)
            if not any(flags):
                segments.append((AAUState(carriers=states, m_active=0), span))
                continue
            sym = record.symbol_off_frac * span
            rest = span - sym
            chan = record.channel_off_frac * rest
            full = rest - chan
            if sym > 0.0:
                segments.append(
                    (AAUState(carriers=states, m_active=m_full, symbol_shutdown=True), sym)
                )
            if chan > 0.0:
                segments.append((AAUState(carriers=states, m_active=m_half), chan))
            if full > 0.0:
                segments.append((AAUState(carriers=states, m_active=m_full), full))
    return HourlyActivity(segments=tuple(segments))


def record_energy(record: HourlyRecord, entry: AAUCatalogEntry,
                  params: AnalyticalParams | None = None) -> float:
    """Analytical hourly energy of a record (``entry.params`` by default)."""
    return hourly_energy(params or entry.params, activity_from_record(record, entry))


# --------------------------------------------------------------------------
# Synthetic catalog

REFERENCE_TYPE_ID = 0

# Field-calibrated constants of the reference dual-carrier, 64-chain unit.
REFERENCE_PARAMS = AnalyticalParams(
    p0=0.22,
    p_bb=0.16,
    d_tran=(1.47e-3,),
    d_pa=3.81e-3,
    eta=0.4,
    m_available=(64,),
    carrier_map=(0, 0),
)

_FREQS = (700.0, 1800.0, 2100.0, 2600.0, 3500.0)
_BANDWIDTHS = (20.0, 40.0, 60.0, 80.0, 100.0)


def _synthetic_entry(i: int) -> AAUCatalogEntry:
    """Deterministically construct catalog type ``i`` (no randomness)."""
    num_carriers = 1 + i % 6
    num_tran = 1 if num_carriers <= 2 else 2
    m0 = (64, 32, 64, 32, 16)[i % 5]
    m_available = (m0,) if num_tran == 1 else (m0, max(m0 // 2, 8))
    carrier_map = tuple(c * num_tran // num_carriers for c in range(num_carriers))
    params = AnalyticalParams(
        p0=0.16 + 0.01 * (i % 9),
        p_bb=0.10 + 0.012 * (i % 7),
        d_tran=tuple(1.1e-3 + 1.0e-4 * ((i + 2 * t) % 6) for t in range(num_tran)),
        d_pa=2.8e-3 + 2.2e-4 * (i % 6),
        eta=0.30 + 0.02 * (i % 6),
        m_available=m_available,
        carrier_map=carrier_map,
    )
    configs = tuple(
        CarrierConfig(
            frequency_mhz=_FREQS[(i + c) % 5],
            bandwidth_mhz=_BANDWIDTHS[(i + 2 * c) % 5],
            p_max=0.05 + 0.01 * ((i + c) % 4),
            transceiver_index=carrier_map[c],
        )
        for c in range(num_carriers)
    )
    return AAUCatalogEntry(
        type_id=i,
        num_transceivers=num_tran,
        m_available=m_available,
        max_carriers=num_carriers,
        carrier_configs=configs,
        params=params,
    )


def default_catalog() -> tuple:
    """25 AAU types spanning 1-6 carriers; type 0 is the reference unit."""
    reference = AAUCatalogEntry(
        type_id=REFERENCE_TYPE_ID,
        num_transceivers=1,
        m_available=(64,),
        max_carriers=2,
        carrier_configs=(
            CarrierConfig(2110.0, 60.0, 0.08, 0),
            CarrierConfig(2170.0, 60.0, 0.08, 0),
        ),
        params=REFERENCE_PARAMS,
    )
    return (reference,) + tuple(_synthetic_entry(i) for i in range(1, 25))


# --------------------------------------------------------------------------
# Synthetic generation


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape knobs for the synthetic traffic/shutdown generator."""

    base_load_range: tuple[float, float] = (0.03, 0.10)
    amplitude_range: tuple[float, float] = (0.45, 0.75)
    peak_hour_range: tuple[float, float] = (12.0, 15.0)
    load_jitter_std: float = 0.04
    carrier_load_spread: float = 0.15
    pmax_scale_range: tuple[float, float] = (0.9, 1.1)
    night_hours: tuple[int, int] = (0, 6)
    dormancy_load_threshold: float = 0.15
    carrier_off_threshold: float = 0.30
    channel_off_threshold: float = 0.40


DEFAULT_GENERATOR_CONFIG = GeneratorConfig()


def generate_synthetic_dataset(
    catalog,
    num_aaus: int,
    num_days: int,
    seed: int,
    noise_std: float = 0.02,
    config: GeneratorConfig = DEFAULT_GENERATOR_CONFIG,
) -> Dataset:
    """Simulate hourly telemetry for a fleet of AAUs.

    AAU ``a`` is assigned type ``catalog[a % len(catalog)]``.  Measurements
    are the analytical hourly energy of the drawn activity plus
    ``N(0, noise_std)``; with ``noise_std=0`` they are exactly on-model.
    Deterministic per ``seed`` (noise and traffic draw from separate named
    substreams, so the traffic is identical across noise settings).
    """
    if not catalog:
        raise ValueError("catalog must not be empty")
    if num_aaus < 1 or num_days < 1:
        raise ValueError("num_aaus and num_days must be at least 1")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")

    rng = substream(seed, "generator")
    noise_rng = substream(seed, "noise")
    cfg = config
    records = []
    for a in range(num_aaus):
        entry = catalog[a % len(catalog)]
        n = entry.params.num_carriers
        aau_id = f"aau{a:04d}"
        base = rng.uniform(*cfg.base_load_range)
        amplitude = rng.uniform(*cfg.amplitude_range)
        peak_hour = rng.uniform(*cfg.peak_hour_range)
        pmax_scale = rng.uniform(*cfg.pmax_scale_range, size=n)
        carriers = tuple(
            CarrierConfig(
                frequency_mhz=c.frequency_mhz,
                bandwidth_mhz=c.bandwidth_mhz,
                p_max=float(c.p_max * pmax_scale[k]),
                transceiver_index=c.transceiver_index,
            )
            for k, c in enumerate(entry.carrier_configs)
        )
        for day in range(num_days):
            for hour in range(24):
                diurnal = 0.5 * (1.0 + math.cos(2.0 * math.pi * (hour - peak_hour) / 24.0))
                cell_load = base + amplitude * diurnal + rng.normal(0.0, cfg.load_jitter_std)
                spread = rng.uniform(
                    1.0 - cfg.carrier_load_spread, 1.0 + cfg.carrier_load_spread, size=n
                )
                loads = np.clip(cell_load * spread, 0.0, 1.0)
                mean_load = float(np.mean(loads))

                dorm = 0.0
                offs = [0.0] * n
                night = cfg.night_hours[0] <= hour < cfg.night_hours[1]
                if night and mean_load < cfg.dormancy_load_threshold:
                    depth = float(
                        rng.uniform(0.4, 1.2)
                        * (1.0 - mean_load / cfg.dormancy_load_threshold)
                    )
                    branch = rng.uniform()
                    if branch < 0.25:
                        # Complete night shutdown: dormant for the whole hour.
                        dorm = 1.0
                    elif branch < 0.5:
                        # Complete cell sleep: every carrier off all hour.
                        offs = [1.0] * n
                    elif branch < 0.75:
                        dorm = min(depth, 1.0)
                    else:
                        # Partial cell sleep: every carrier off for a staggered prefix.
                        stagger = rng.uniform(0.75, 1.1, size=n)
                        offs = [min(depth * float(s), 1.0) for s in stagger]
                for k in range(1, n):
                    if offs[k] == 0.0 and loads[k] < cfg.carrier_off_threshold:
                        offs[k] = float(
                            rng.uniform(0.0, 1.1)
                            * (1.0 - loads[k] / cfg.carrier_off_threshold)
                        )
                        offs[k] = min(offs[k], 1.0)
                if mean_load < cfg.channel_off_threshold:
                    chan = float(
                        rng.uniform(0.0, 1.0)
                        * (1.0 - mean_load / cfg.channel_off_threshold)
                    )
                else:
                    chan = 0.0
                sym = float(min(max(rng.uniform(0.0, 1.0) * (1.0 - mean_load), 0.0), 1.0))

                record = HourlyRecord(
                    timestamp=day * 24 + hour,
                    aau_id=aau_id,
                    type_id=entry.type_id,
                    carriers=carriers,
                    prb_load=tuple(float(v) for v in loads),
                    carrier_off_frac=tuple(offs),
                    channel_off_frac=chan,
                    symbol_off_frac=sym,
                    dormancy_frac=dorm,
                    measured_power=0.0,
                )
                truth = record_energy(record, entry)
                measured = max(truth + float(noise_rng.normal(0.0, noise_std)), 0.0)
                records.append(replace(record, measured_power=measured))
    return Dataset(records=tuple(records), catalog=tuple(catalog))


def split_by_days(dataset: Dataset, train_days: int, test_days: int):
    """Split by whole days: first ``train_days`` train, next ``test_days`` test.

    ``train_days + test_days`` must not exceed the days present; at equality
    the two halves partition the records exactly.
    """
    if train_days < 0 or test_days < 0:
        raise ValueError("train_days and test_days must be non-negative")
    present = dataset.num_days
    if train_days + test_days > present:
        raise ValueError(
            f"requested {train_days}+{test_days} days but dataset has {present}"
        )
    cut = train_days * 24
    end = (train_days + test_days) * 24
    train = tuple(r for r in dataset.records if r.timestamp < cut)
    test = tuple(r for r in dataset.records if cut <= r.timestamp < end)
    return (
        Dataset(records=train, catalog=dataset.catalog),
        Dataset(records=test, catalog=dataset.catalog),
    )


# --------------------------------------------------------------------------
# CSV / JSON I/O

CSV_COLUMNS = (
    "timestamp",
    "aau_id",
    "type_id",
    "carrier_idx",
    "freq_mhz",
    "bw_mhz",
    "p_max",
    "prb_load",
    "carrier_off_frac",
    "channel_off_frac",
    "symbol_off_frac",
    "dormancy_frac",
    "measured_power",
)


def _default_catalog_path(csv_path):
    text = str(csv_path)
    stem = text[: -len(".csv")] if text.endswith(".csv") else text
    return stem + ".catalog.json"


def save_catalog(catalog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([e.to_json_dict() for e in catalog], fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_catalog(path) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        docs = json.load(fh)
    if not isinstance(docs, list):
        raise SchemaError("catalog file must hold a JSON array of entries")
    return tuple(AAUCatalogEntry.from_json_dict(d) for d in docs)


def save_dataset(dataset: Dataset, csv_path, catalog_path=None) -> None:
    """Write records as CSV (one line per record and carrier) plus catalog JSON."""
    if catalog_path is None:
        catalog_path = _default_catalog_path(csv_path)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in dataset.records:
            for i, cfg in enumerate(rec.carriers):
                writer.writerow(
                    [
                        rec.timestamp,
                        rec.aau_id,
                        rec.type_id,
                        i,
                        repr(cfg.frequency_mhz),
                        repr(cfg.bandwidth_mhz),
                        repr(cfg.p_max),
                        repr(rec.prb_load[i]),
                        repr(rec.carrier_off_frac[i]),
                        repr(rec.channel_off_frac),
                        repr(rec.symbol_off_frac),
                        repr(rec.dormancy_frac),
                        repr(rec.measured_power),
                    ]
                )
    save_catalog(dataset.catalog, catalog_path)


def _parse_row(row, line_no):
    if len(row) != len(CSV_COLUMNS):
        raise SchemaError(
            f"line {line_no}: expected {len(CSV_COLUMNS)} fields, got {len(row)}"
        )
    try:
        return {
            "timestamp": int(row[0]),
            "aau_id": row[1],
            "type_id": int(row[2]),
            "carrier_idx": int(row[3]),
            "freq_mhz": float(row[4]),
            "bw_mhz": float(row[5]),
            "p_max": float(row[6]),
            "prb_load": float(row[7]),
            "carrier_off_frac": float(row[8]),
            "channel_off_frac": float(row[9]),
            "symbol_off_frac": float(row[10]),
            "dormancy_frac": float(row[11]),
            "measured_power": float(row[12]),
        }
    except ValueError as exc:
        raise SchemaError(f"line {line_no}: malformed value ({exc})") from None


def _build_record(group_rows, first_line):
    carriers = []
    loads = []
    offs = []
    head = group_rows[0]
    for j, row in enumerate(group_rows):
        if row["carrier_idx"] != j:
            raise SchemaError(
                f"line {first_line + j}: expected carrier_idx {j}, got {row['carrier_idx']}"
            )
        for name in (
            "type_id",
            "channel_off_frac",
            "symbol_off_frac",
            "dormancy_frac",
            "measured_power",
        ):
            if row[name] != head[name]:
                raise SchemaError(
                    f"line {first_line + j}: {name} differs within one record"
                )
        carriers.append(
            CarrierConfig(
                frequency_mhz=row["freq_mhz"],
                bandwidth_mhz=row["bw_mhz"],
                p_max=row["p_max"],
                transceiver_index=0,
            )
        )
        loads.append(row["prb_load"])
        offs.append(row["carrier_off_frac"])
    return HourlyRecord(
        timestamp=head["timestamp"],
        aau_id=head["aau_id"],
        type_id=head["type_id"],
        carriers=tuple(carriers),
        prb_load=tuple(loads),
        carrier_off_frac=tuple(offs),
        channel_off_frac=head["channel_off_frac"],
        symbol_off_frac=head["symbol_off_frac"],
        dormancy_frac=head["dormancy_frac"],
        measured_power=head["measured_power"],
    )


def _attach_transceivers(record: HourlyRecord, catalog) -> HourlyRecord:
    """Fill per-carrier transceiver indices from the catalog's carrier map."""
    for entry in catalog:
        if entry.type_id == record.type_id:
            if len(record.carriers) == len(entry.carrier_configs):
                carriers = tuple(
                    CarrierConfig(
                        frequency_mhz=c.frequency_mhz,
                        bandwidth_mhz=c.bandwidth_mhz,
                        p_max=c.p_max,
                        transceiver_index=cfg.transceiver_index,
                    )
                    for c, cfg in zip(record.carriers, entry.carrier_configs)
                )
                return HourlyRecord(
                    timestamp=record.timestamp,
                    aau_id=record.aau_id,
                    type_id=record.type_id,
                    carriers=carriers,
                    prb_load=record.prb_load,
                    carrier_off_frac=record.carrier_off_frac,
                    channel_off_frac=record.channel_off_frac,
                    symbol_off_frac=record.symbol_off_frac,
                    dormancy_frac=record.dormancy_frac,
                    measured_power=record.measured_power,
                )
            return record
    return record


def load_dataset(csv_path, catalog_path=None) -> Dataset:
    """Read a telemetry CSV (plus its catalog sidecar) back into a Dataset.

    The header must match :data:`CSV_COLUMNS` exactly; malformed rows are
    reported with their line number.  An empty file (header only) yields an
    empty dataset.
    """
    if catalog_path is None:
        catalog_path = _default_catalog_path(csv_path)
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: a header row is required") from None
        if tuple(header) != CSV_COLUMNS:
            unknown = sorted(set(header) - set(CSV_COLUMNS))
            missing = sorted(set(CSV_COLUMNS) - set(header))
            detail = []
            if unknown:
                detail.append(f"unknown columns {unknown}")
            if missing:
                detail.append(f"missing columns {missing}")
            if not detail:
                detail.append("columns out of order")
            raise SchemaError(f"bad header: {'; '.join(detail)}")

        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            rows.append((line_no, _parse_row(row, line_no)))

    if not rows:
        try:
            catalog = load_catalog(catalog_path)
        except FileNotFoundError:
            catalog = ()
        return Dataset(records=(), catalog=catalog)

    catalog = load_catalog(catalog_path)
    records = []
    group = []
    group_line = None
    key = None
    for line_no, row in rows:
        row_key = (row["aau_id"], row["timestamp"])
        if key is None or row_key != key:
            if group:
                records.append(_build_record(group, group_line))
            group = [row]
            group_line = line_no
            key = row_key
        else:
            group.append(row)
    records.append(_build_record(group, group_line))

    records = [_attach_transceivers(r, catalog) for r in records]
    for rec in records:
        validate_record(rec, catalog)
    return Dataset(records=tuple(records), catalog=catalog)
