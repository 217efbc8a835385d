"""Feature layout, min-max normalization, and the schema fingerprint."""

import numpy as np
import pytest

from aaupower import Dataset, FeatureSchema, Normalizer, encode, fit_normalizer
from aaupower.features import (
    DEFAULT_SCHEMA,
    PER_CARRIER_FEATURES,
    encode_records,
    load_normalizer,
    measured_targets,
    save_normalizer,
)
from test_telemetry import make_record


def test_default_schema_width():
    assert DEFAULT_SCHEMA.width == 85
    assert DEFAULT_SCHEMA.num_types == 25
    assert DEFAULT_SCHEMA.max_carriers == 6
    assert len(PER_CARRIER_FEATURES) == 10


def test_schema_validation():
    with pytest.raises(ValueError):
        FeatureSchema(num_types=0)
    with pytest.raises(ValueError):
        FeatureSchema(per_carrier_features=("prb_load", "bogus", "configured"))
    with pytest.raises(ValueError, match="configured"):
        FeatureSchema(per_carrier_features=("configured", "prb_load"))
    small = FeatureSchema(num_types=3, max_carriers=2,
                          per_carrier_features=("prb_load", "configured"))
    assert small.width == 3 + 2 * 2


def test_schema_hash_is_stable_fingerprint():
    a = FeatureSchema()
    b = FeatureSchema()
    assert a.hash() == b.hash() == DEFAULT_SCHEMA.hash()
    assert len(a.hash()) == 16
    assert int(a.hash(), 16) >= 0  # hex digest
    assert FeatureSchema(max_carriers=4).hash() != a.hash()


def test_normalizer_affine_extension():
    norm = Normalizer(bounds={"prb_load": (0.0, 10.0)})
    assert norm.transform("prb_load", 0.0) == 0.0
    assert norm.transform("prb_load", 10.0) == 1.0
    assert norm.transform("prb_load", 12.0) == pytest.approx(1.2)
    assert norm.transform("prb_load", -5.0) == pytest.approx(-0.5)
    assert norm.inverse("prb_load", 1.2) == pytest.approx(12.0)


def test_normalizer_constant_feature_maps_to_zero():
    norm = Normalizer(bounds={"p_max": (0.08, 0.08)})
    assert norm.transform("p_max", 0.08) == 0.0
    assert norm.transform("p_max", 0.5) == 0.0
    assert norm.inverse("p_max", 0.7) == 0.08


def test_normalizer_unknown_feature():
    norm = Normalizer(bounds={})
    with pytest.raises(ValueError, match="no bounds"):
        norm.transform("prb_load", 0.5)


def test_fit_normalizer_bounds(catalog):
    entry = catalog[0]
    recs = (
        make_record(entry, loads=(0.1, 0.9), timestamp=0),
        make_record(entry, loads=(0.3, 0.5), chan=0.6, timestamp=1),
    )
    norm = fit_normalizer(Dataset(records=recs, catalog=catalog))
    assert norm.bounds["prb_load"] == (0.1, 0.9)
    assert norm.bounds["channel_off_frac"] == (0.0, 0.6)
    assert norm.bounds["freq_mhz"] == (2110.0, 2170.0)
    assert "configured" not in norm.bounds


def test_fit_normalizer_empty(catalog):
    with pytest.raises(ValueError, match="empty"):
        fit_normalizer(Dataset(records=(), catalog=catalog))


def test_normalizer_json_round_trip(tiny_dataset, tmp_path):
    norm = fit_normalizer(tiny_dataset)
    path = tmp_path / "normalizer.json"
    save_normalizer(norm, path)
    loaded = load_normalizer(path)
    assert loaded.bounds == norm.bounds
    bad = tmp_path / "bad.json"
    bad.write_text('{"prb_load": [1.0, 0.0]}')
    with pytest.raises(ValueError, match="max < min"):
        load_normalizer(bad)


def test_encode_one_hot_and_blocks(tiny_dataset):
    norm = fit_normalizer(tiny_dataset)
    rec = tiny_dataset.records[0]
    vec = encode(rec, norm)
    assert vec.shape == (85,)
    one_hot = vec[:25]
    assert one_hot[rec.type_id] == 1.0
    assert one_hot.sum() == 1.0

    block = len(PER_CARRIER_FEATURES)
    n = len(rec.carriers)
    for i in range(6):
        base = 25 + i * block
        configured = vec[base + block - 1]
        if i < n:
            assert configured == 1.0
        else:
            assert np.all(vec[base:base + block] == 0.0)


def test_encode_train_rows_stay_in_unit_range(tiny_dataset):
    """Rows the normalizer was fitted on land in [0, 1] (configured flag aside)."""
    norm = fit_normalizer(tiny_dataset)
    X = encode_records(tiny_dataset.records[::11], norm)
    assert np.isfinite(X).all()
    assert X.min() >= 0.0 and X.max() <= 1.0


def test_encode_rejects_unknown_type(tiny_dataset, catalog):
    norm = fit_normalizer(tiny_dataset)
    rec = make_record(catalog[0])
    small = FeatureSchema(num_types=2, max_carriers=6)
    bad = make_record(catalog[3])  # type_id 3 does not fit num_types=2
    with pytest.raises(ValueError, match="type_id"):
        encode(bad, norm, small)
    tiny = FeatureSchema(num_types=25, max_carriers=1)
    with pytest.raises(ValueError, match="carriers"):
        encode(rec, norm, tiny)


def test_encode_records_and_targets(tiny_dataset):
    norm = fit_normalizer(tiny_dataset)
    recs = tiny_dataset.records[:40]
    X = encode_records(recs, norm)
    y = measured_targets(recs)
    assert X.shape == (40, 85)
    assert y.shape == (40,)
    assert y[0] == recs[0].measured_power
    single = encode(recs[17], norm)
    assert np.array_equal(X[17], single)
