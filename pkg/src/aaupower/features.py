"""Fixed-width feature encoding of telemetry records for the estimator.

A record becomes ``num_types`` one-hot entries followed by ``max_carriers``
blocks of per-carrier features.  Numeric features are min-max normalized
with statistics fitted on the configured carriers of a training set; the
trailing ``configured`` flag of each block passes through raw.  Blocks of
absent carriers are all zero.  Values outside the fitted range map affinely
beyond [0, 1] (no clipping)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .telemetry import Dataset, HourlyRecord

#: Per-carrier feature names in block order; "configured" must stay last and
#: is never normalized.
PER_CARRIER_FEATURES = (
    "freq_mhz",
    "bw_mhz",
    "p_max",
    "prb_load",
    "carrier_off_frac",
    "channel_off_frac",
    "symbol_off_frac",
    "dormancy_frac",
    "transceiver_index",
    "configured",
)


@dataclass(frozen=True)
class FeatureSchema:
    """Layout of the feature vector (defaults give width 85)."""

    num_types: int = 25
    max_carriers: int = 6
    per_carrier_features: tuple[str, ...] = PER_CARRIER_FEATURES

    def __post_init__(self):
        if self.num_types < 1 or self.max_carriers < 1:
            raise ValueError("num_types and max_carriers must be positive")
        unknown = set(self.per_carrier_features) - set(PER_CARRIER_FEATURES)
        if unknown:
            raise ValueError(f"unknown per-carrier features: {sorted(unknown)}")
        if self.per_carrier_features[-1] != "configured":
            raise ValueError("'configured' must be the last per-carrier feature")

    @property
    def width(self) -> int:
        return self.num_types + self.max_carriers * len(self.per_carrier_features)

    def hash(self) -> str:
        """Stable 16-hex digest of the layout, embedded in weight files."""
        doc = {
            "num_types": self.num_types,
            "max_carriers": self.max_carriers,
            "per_carrier_features": list(self.per_carrier_features),
        }
        raw = json.dumps(doc, sort_keys=True).encode("utf-8")
        return hashlib.sha256(raw).hexdigest()[:16]


DEFAULT_SCHEMA = FeatureSchema()


def _raw_feature(record: HourlyRecord, carrier_idx: int, name: str) -> float:
    cfg = record.carriers[carrier_idx]
    if name == "freq_mhz":
        return cfg.frequency_mhz
    if name == "bw_mhz":
        return cfg.bandwidth_mhz
    if name == "p_max":
        return cfg.p_max
    if name == "prb_load":
        return record.prb_load[carrier_idx]
    if name == "carrier_off_frac":
        return record.carrier_off_frac[carrier_idx]
    if name == "channel_off_frac":
        return record.channel_off_frac
    if name == "symbol_off_frac":
        return record.symbol_off_frac
    if name == "dormancy_frac":
        return record.dormancy_frac
    if name == "transceiver_index":
        return float(cfg.transceiver_index)
    raise ValueError(f"unknown feature {name!r}")


@dataclass(frozen=True)
class Normalizer:
    """Per-feature min-max bounds, shared across the carrier blocks.

    ``transform`` maps the fitted minimum to 0 and maximum to 1 and extends
    the same affine map outside the fitted range; a constant feature maps
    to 0 everywhere.
    """

    bounds: dict

    def transform(self, name: str, value: float) -> float:
        lo, hi = self._bounds_for(name)
        if hi <= lo:
            return 0.0
        return (value - lo) / (hi - lo)

    def inverse(self, name: str, value: float) -> float:
        lo, hi = self._bounds_for(name)
        if hi <= lo:
            return lo
        return lo + value * (hi - lo)

    def _bounds_for(self, name: str):
        try:
            return self.bounds[name]
        except KeyError:
            raise ValueError(f"normalizer has no bounds for feature {name!r}") from None

    def to_json_dict(self) -> dict:
        return {name: [lo, hi] for name, (lo, hi) in sorted(self.bounds.items())}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Normalizer":
        bounds = {}
        for name, pair in doc.items():
            lo, hi = float(pair[0]), float(pair[1])
            if hi < lo:
                raise ValueError(f"feature {name!r} has max < min")
            bounds[name] = (lo, hi)
        return cls(bounds=bounds)


def save_normalizer(normalizer: Normalizer, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(normalizer.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_normalizer(path) -> Normalizer:
    with open(path, "r", encoding="utf-8") as fh:
        return Normalizer.from_json_dict(json.load(fh))


def fit_normalizer(train: Dataset, schema: FeatureSchema = DEFAULT_SCHEMA) -> Normalizer:
    """Fit min/max per feature name over the configured carriers of ``train``."""
    if not train.records:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    names = [n for n in schema.per_carrier_features if n != "configured"]
    inf = float("inf")
    lo = {n: inf for n in names}
    hi = {n: -inf for n in names}
    for rec in train.records:
        for i in range(len(rec.carriers)):
            for n in names:
                v = _raw_feature(rec, i, n)
                if v < lo[n]:
                    lo[n] = v
                if v > hi[n]:
                    hi[n] = v
    return Normalizer(bounds={n: (lo[n], hi[n]) for n in names})


def encode(record: HourlyRecord, normalizer: Normalizer,
           schema: FeatureSchema = DEFAULT_SCHEMA) -> np.ndarray:
    """Encode one record as a ``schema.width`` float64 vector."""
    if not 0 <= record.type_id < schema.num_types:
        raise ValueError(
            f"type_id {record.type_id} outside schema range [0, {schema.num_types})"
        )
    if len(record.carriers) > schema.max_carriers:
        raise ValueError(
            f"record has {len(record.carriers)} carriers; schema allows "
            f"{schema.max_carriers}"
        )
    vec = np.zeros(schema.width)
    vec[record.type_id] = 1.0
    block = len(schema.per_carrier_features)
    for i in range(len(record.carriers)):
        base = schema.num_types + i * block
        for j, name in enumerate(schema.per_carrier_features):
            if name == "configured":
                vec[base + j] = 1.0
            else:
                vec[base + j] = normalizer.transform(name, _raw_feature(record, i, name))
    return vec


def encode_records(records, normalizer: Normalizer,
                   schema: FeatureSchema = DEFAULT_SCHEMA) -> np.ndarray:
    """Stack encodings of ``records`` into an (n, width) matrix."""
    return np.array([encode(r, normalizer, schema) for r in records], dtype=float)


def measured_targets(records) -> np.ndarray:
    return np.array([r.measured_power for r in records], dtype=float)
