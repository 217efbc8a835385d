"""Unit tests of the analytical power model against hand-derived values.

The frozen reference numbers below were computed by hand from the model
definition (sum the five terms with the reference constants); the brute-force
oracle in oracles.py recomputes every case with literal loops.
"""

import json

import numpy as np
import pytest

from aaupower import (
    AAUState,
    AnalyticalParams,
    CarrierState,
    HourlyActivity,
    hourly_energy,
    instantaneous_power,
    legacy_linear_model,
    load_params,
    reference_state,
    save_params,
    savings_fraction,
    transmit_power,
)
from conftest import make_state
from oracles import brute_force_power

P_REFERENCE = 0.71792  # p0 + p_bb + 64*d_tran + 64*d_pa, zero load
P_SYMBOL = 0.47408  # PA terms muted
P_ALL_OFF = 0.38  # p0 + p_bb only
P_HALF_CHAINS = 0.596  # 32 of 64 chains powered
P_ONE_CARRIER_LOADED = 0.81792  # + 0.08 * 0.5 / 0.4
P_DORMANT = 0.22  # p0 alone


def oracle_power(params, state):
    return brute_force_power(
        params.p0,
        params.p_bb,
        params.d_tran,
        params.d_pa,
        params.eta,
        params.m_available,
        params.carrier_map,
        [c.active for c in state.carriers],
        [c.prb_load for c in state.carriers],
        [c.p_max for c in state.carriers],
        state.m_active,
        state.symbol_shutdown,
        state.dormant,
    )


def test_reference_power_value(ref_params, ref_state):
    p = instantaneous_power(ref_params, ref_state)
    assert p == pytest.approx(P_REFERENCE, abs=1e-12)
    assert p == pytest.approx(oracle_power(ref_params, ref_state), abs=1e-15)


def test_symbol_shutdown_value(ref_params):
    state = make_state([0.0, 0.0], p_max=0.0, symbol=True)
    assert instantaneous_power(ref_params, state) == pytest.approx(P_SYMBOL, abs=1e-12)


def test_all_carriers_off_value(ref_params):
    state = make_state([0.0, 0.0], p_max=0.0, active=[False, False])
    assert instantaneous_power(ref_params, state) == pytest.approx(P_ALL_OFF, abs=1e-12)


def test_half_chains_value(ref_params):
    state = make_state([0.0, 0.0], p_max=0.0, m_active=32)
    assert instantaneous_power(ref_params, state) == pytest.approx(P_HALF_CHAINS, abs=1e-12)


def test_one_loaded_carrier_value(ref_params):
    state = make_state([0.5, 0.0], p_max=0.08, active=[True, False])
    assert instantaneous_power(ref_params, state) == pytest.approx(
        P_ONE_CARRIER_LOADED, abs=1e-12
    )


def test_dormant_value(ref_params):
    state = make_state([0.0, 0.0], p_max=0.0, dormant=True)
    assert instantaneous_power(ref_params, state) == pytest.approx(P_DORMANT, abs=1e-12)
    # dormancy overrides everything else
    busy = make_state([1.0, 1.0], p_max=0.08, dormant=True)
    assert instantaneous_power(ref_params, busy) == pytest.approx(P_DORMANT, abs=1e-12)


def test_mode_ordering(ref_params):
    """For the reference constants the saving modes order strictly."""
    dormant = instantaneous_power(ref_params, make_state([0.0, 0.0], p_max=0.0, dormant=True))
    all_off = instantaneous_power(
        ref_params, make_state([0.0, 0.0], p_max=0.0, active=[False, False])
    )
    symbol = instantaneous_power(ref_params, make_state([0.0, 0.0], p_max=0.0, symbol=True))
    half = instantaneous_power(ref_params, make_state([0.0, 0.0], p_max=0.0, m_active=32))
    full = instantaneous_power(ref_params, make_state([0.0, 0.0], p_max=0.0))
    loaded = instantaneous_power(ref_params, make_state([0.7, 0.7]))
    assert dormant < all_off < symbol < half < full < loaded


def test_brute_force_sweep(ref_params):
    """Random states across small topologies must match the loop oracle."""
    rng = np.random.default_rng(42)
    topologies = [
        ((64,), (0,)),
        ((64,), (0, 0)),
        ((32, 16), (0, 0, 1)),
    ]
    for m_av, cmap in topologies:
        d_tran = tuple(0.001 + 0.002 * i for i in range(len(m_av)))
        params = AnalyticalParams(
            p0=0.22, p_bb=0.16, d_tran=d_tran, d_pa=0.00381, eta=0.4,
            m_available=m_av, carrier_map=cmap,
        )
        for _ in range(200):
            carriers = tuple(
                CarrierState(
                    active=bool(rng.integers(0, 2)),
                    prb_load=float(rng.uniform(0, 1)),
                    p_max=float(rng.uniform(0, 0.1)),
                )
                for _ in cmap
            )
            state = AAUState(
                carriers=carriers,
                m_active=int(rng.integers(0, max(m_av) + 1)),
                symbol_shutdown=bool(rng.integers(0, 2)),
                dormant=bool(rng.integers(0, 2)),
            )
            assert instantaneous_power(params, state) == pytest.approx(
                oracle_power(params, state), abs=1e-12
            )


def test_affine_in_m_active(ref_params):
    """P is affine in the powered chain count: second differences vanish."""
    values = [
        instantaneous_power(ref_params, make_state([0.3, 0.3], m_active=m))
        for m in (0, 16, 32, 48, 64)
    ]
    diffs = np.diff(values)
    assert np.allclose(diffs, diffs[0], atol=1e-12)
    assert diffs[0] == pytest.approx(16 * ref_params.d_pa, abs=1e-12)


def test_monotone_in_load(ref_params):
    prev = -1.0
    for load in np.linspace(0, 1, 11):
        p = instantaneous_power(ref_params, make_state([load, load]))
        assert p > prev
        prev = p


def test_transmit_power():
    assert transmit_power(CarrierState(active=True, prb_load=0.5, p_max=0.08)) == 0.04
    assert transmit_power(CarrierState(active=False, prb_load=0.5, p_max=0.08)) == 0.0
    assert transmit_power(CarrierState(active=True, prb_load=0.0, p_max=0.08)) == 0.0


def test_hourly_energy_mix(ref_params):
    dormant = make_state([0.0, 0.0], p_max=0.0, dormant=True)
    all_off = make_state([0.0, 0.0], p_max=0.0, active=[False, False])
    activity = HourlyActivity(segments=((dormant, 0.5), (all_off, 0.5)))
    assert hourly_energy(ref_params, activity) == pytest.approx(0.30, abs=1e-12)


def test_hourly_activity_validation(ref_params):
    state = make_state([0.0, 0.0], p_max=0.0)
    with pytest.raises(ValueError):
        HourlyActivity(segments=((state, 0.5), (state, 0.6)))
    with pytest.raises(ValueError):
        HourlyActivity(segments=((state, -0.1), (state, 1.1)))
    with pytest.raises(ValueError):
        HourlyActivity(segments=())


def test_params_validation():
    good = dict(p0=0.22, p_bb=0.16, d_tran=(0.00147,), d_pa=0.00381, eta=0.4,
                m_available=(64,), carrier_map=(0, 0))
    AnalyticalParams(**good)  # sanity: the base case constructs
    for bad in (
        dict(good, p0=-0.1),
        dict(good, d_pa=-1e-9),
        dict(good, eta=0.0),
        dict(good, eta=1.0001),
        dict(good, d_tran=(-0.001,)),
        dict(good, d_tran=()),
        dict(good, d_tran=(0.001, 0.002)),  # length mismatch with m_available
        dict(good, m_available=(0,)),
        dict(good, carrier_map=()),
        dict(good, carrier_map=(0, 1)),  # transceiver 1 does not exist
    ):
        with pytest.raises(ValueError):
            AnalyticalParams(**bad)
    assert AnalyticalParams(**dict(good, eta=1.0)).eta == 1.0


def test_state_validation(ref_params):
    with pytest.raises(ValueError):
        CarrierState(active=True, prb_load=1.2, p_max=0.08)
    with pytest.raises(ValueError):
        CarrierState(active=True, prb_load=0.5, p_max=-0.01)
    with pytest.raises(ValueError):
        AAUState(carriers=(), m_active=64)
    with pytest.raises(ValueError):
        AAUState(carriers=(CarrierState(True, 0.0, 0.0),), m_active=-1)
    # topology mismatches are caught at evaluation time
    with pytest.raises(ValueError, match="carriers"):
        instantaneous_power(ref_params, make_state([0.0], p_max=0.0))
    with pytest.raises(ValueError, match="m_active"):
        instantaneous_power(ref_params, make_state([0.0, 0.0], m_active=65))


def test_params_json_round_trip(ref_params, tmp_path):
    doc = ref_params.to_json_dict()
    assert set(doc) == {"p0", "p_bb", "d_tran", "d_pa", "eta", "m_available", "carrier_map"}
    assert AnalyticalParams.from_json_dict(doc) == ref_params
    # and through a real file
    path = tmp_path / "params.json"
    save_params(ref_params, path)
    assert load_params(path) == ref_params
    on_disk = json.loads(path.read_text())
    assert on_disk["eta"] == 0.4 and on_disk["m_available"] == [64]


def test_params_json_missing_field(ref_params):
    doc = ref_params.to_json_dict()
    del doc["eta"]
    with pytest.raises(ValueError, match="eta"):
        AnalyticalParams.from_json_dict(doc)


def test_savings_values(ref_params):
    symbol = make_state([0.0, 0.0], p_max=0.0, symbol=True)
    all_off = make_state([0.0, 0.0], p_max=0.0, active=[False, False])
    dormant = make_state([0.0, 0.0], p_max=0.0, dormant=True)

    s_symbol = savings_fraction(ref_params, symbol)
    s_all_off = savings_fraction(ref_params, all_off)
    s_dormant = savings_fraction(ref_params, dormant)

    assert s_symbol == pytest.approx(1 - P_SYMBOL / P_REFERENCE, abs=1e-12)
    assert s_all_off == pytest.approx(1 - P_ALL_OFF / P_REFERENCE, abs=1e-12)
    assert s_dormant == pytest.approx(1 - P_DORMANT / P_REFERENCE, abs=1e-12)

    # headline figures
    assert s_symbol == pytest.approx(0.34, abs=0.01)
    assert s_all_off == pytest.approx(0.47, abs=0.01)
    assert s_dormant == pytest.approx(0.70, abs=0.01)


def test_savings_zero_reference():
    params = AnalyticalParams(p0=0.0, p_bb=0.0, d_tran=(0.0,), d_pa=0.0, eta=0.4,
                              m_available=(64,), carrier_map=(0,))
    with pytest.raises(ValueError, match="reference power"):
        savings_fraction(params, make_state([0.0], p_max=0.0))


def test_reference_state_shape(ref_params):
    state = reference_state(ref_params)
    assert len(state.carriers) == ref_params.num_carriers
    assert state.m_active == max(ref_params.m_available)
    assert all(c.active and c.prb_load == 0.0 for c in state.carriers)
    assert not state.symbol_shutdown and not state.dormant


def test_legacy_linear_model():
    assert legacy_linear_model(0.3, 2.0, 0.05) == pytest.approx(0.4)
    assert legacy_linear_model(0.3, 2.0, 0.0) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        legacy_linear_model(-0.1, 2.0, 0.05)
    with pytest.raises(ValueError):
        legacy_linear_model(0.3, 0.0, 0.05)
    with pytest.raises(ValueError):
        legacy_linear_model(0.3, 2.0, -0.05)
