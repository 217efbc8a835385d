import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from aaupower import (
    AnalyticalParams,
    CarrierState,
    AAUState,
    default_catalog,
    generate_synthetic_dataset,
    reference_state,
)
from aaupower.telemetry import REFERENCE_PARAMS


@pytest.fixture(scope="session")
def ref_params() -> AnalyticalParams:
    return REFERENCE_PARAMS


@pytest.fixture(scope="session")
def ref_state() -> AAUState:
    return reference_state(REFERENCE_PARAMS)


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def tiny_dataset(catalog):
    """Small deterministic fleet reused by telemetry/feature tests."""
    return generate_synthetic_dataset(catalog, num_aaus=10, num_days=3, seed=3, noise_std=0.01)


def make_state(loads, p_max=0.08, m_active=64, symbol=False, dormant=False, active=None):
    """Two-transceiver-free helper: every carrier on transceiver 0."""
    if active is None:
        active = [True] * len(loads)
    carriers = tuple(
        CarrierState(active=bool(a), prb_load=float(l), p_max=p_max)
        for a, l in zip(active, loads)
    )
    return AAUState(carriers=carriers, m_active=m_active,
                    symbol_shutdown=symbol, dormant=dormant)
