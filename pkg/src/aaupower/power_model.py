"""Analytical power model for multi-carrier 5G active antenna units (AAUs).

Instantaneous AAU power is the sum of five contributions: always-on baseline
circuitry, baseband processing, per-band transceiver electronics, the static
draw of the active multi-carrier power amplifiers (MCPAs), and the amplified
transmit power::

    P = p0 + p_bb + sum_t m_available[t] * d_tran[t]   (transceivers with traffic)
          + m_active * d_pa                            (PA static draw)
          + (1 / eta) * sum_c p_max[c] * prb_load[c]   (amplified transmit power)

Energy-saving modes reshape the sum:

* **symbol shutdown** -- MCPAs are muted between transmissions; both PA terms
  drop, transceivers stay powered.
* **channel shutdown** -- some RF chains/MCPAs are switched off
  (``m_active`` < full count); the PA static draw shrinks proportionally.
* **carrier shutdown** -- a carrier stops transmitting.  A transceiver (and,
  when no carrier is left anywhere, the MCPAs) powers off only once *all*
  carriers it serves are off.
* **deep dormancy** -- everything except the baseline circuitry sleeps.

All power values are normalized (dimensionless); no absolute watt scale is
defined or implied anywhere in this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class AnalyticalParams:
    """Fitted constants of the analytical model for one AAU type.

    Attributes:
        p0: Baseline circuitry power (always on, even in deep dormancy).
        p_bb: Baseband processing power.
        d_tran: Per-transceiver electronics power per RF chain; length equals
            the number of transceivers.
        d_pa: Static power draw per active MCPA.
        eta: Power-amplifier efficiency, in (0, 1].
        m_available: RF chains available per transceiver; same length as
            ``d_tran``.
        carrier_map: For each carrier, the index of the transceiver serving
            it.  Length equals the number of configured carriers.
    """

    p0: float
    p_bb: float
    d_tran: tuple[float, ...]
    d_pa: float
    eta: float
    m_available: tuple[int, ...]
    carrier_map: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "d_tran", tuple(float(v) for v in self.d_tran))
        object.__setattr__(self, "m_available", tuple(int(v) for v in self.m_available))
        object.__setattr__(self, "carrier_map", tuple(int(v) for v in self.carrier_map))
        if self.p0 < 0 or self.p_bb < 0 or self.d_pa < 0:
            raise ValueError("power constants p0, p_bb, d_pa must be non-negative")
        if any(v < 0 for v in self.d_tran):
            raise ValueError("per-transceiver powers d_tran must be non-negative")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if len(self.d_tran) == 0:
            raise ValueError("at least one transceiver is required")
        if len(self.m_available) != len(self.d_tran):
            raise ValueError("m_available and d_tran must have one entry per transceiver")
        if any(m <= 0 for m in self.m_available):
            raise ValueError("m_available entries must be positive")
        if len(self.carrier_map) == 0:
            raise ValueError("at least one carrier is required")
        t = len(self.d_tran)
        if any(not 0 <= c < t for c in self.carrier_map):
            raise ValueError(f"carrier_map entries must index a transceiver in [0, {t})")

    @property
    def num_transceivers(self) -> int:
        return len(self.d_tran)

    @property
    def num_carriers(self) -> int:
        return len(self.carrier_map)

    def to_json_dict(self) -> dict:
        """Serialize with the canonical field names."""
        return {
            "p0": self.p0,
            "p_bb": self.p_bb,
            "d_tran": list(self.d_tran),
            "d_pa": self.d_pa,
            "eta": self.eta,
            "m_available": list(self.m_available),
            "carrier_map": list(self.carrier_map),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AnalyticalParams":
        required = {"p0", "p_bb", "d_tran", "d_pa", "eta", "m_available", "carrier_map"}
        missing = required - doc.keys()
        if missing:
            raise ValueError(f"analytical params document missing fields: {sorted(missing)}")
        return cls(
            p0=float(doc["p0"]),
            p_bb=float(doc["p_bb"]),
            d_tran=tuple(float(v) for v in doc["d_tran"]),
            d_pa=float(doc["d_pa"]),
            eta=float(doc["eta"]),
            m_available=tuple(int(v) for v in doc["m_available"]),
            carrier_map=tuple(int(v) for v in doc["carrier_map"]),
        )


def save_params(params: AnalyticalParams, path) -> None:
    """Write analytical parameters to a JSON file."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_params(path) -> AnalyticalParams:
    """Read analytical parameters from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return AnalyticalParams.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class CarrierState:
    """Operating point of one carrier at one instant."""

    active: bool
    prb_load: float
    p_max: float

    def __post_init__(self):
        if not 0.0 <= self.prb_load <= 1.0:
            raise ValueError(f"prb_load must be in [0, 1], got {self.prb_load}")
        if self.p_max < 0:
            raise ValueError(f"p_max must be non-negative, got {self.p_max}")


@dataclass(frozen=True)
class AAUState:
    """Operating point of a whole AAU at one instant.

    ``m_active`` counts the powered MCPAs/RF chains; it must not exceed the
    largest per-transceiver chain count of the type it is evaluated against
    (checked in :func:`instantaneous_power`, which knows the parameters).
    ``dormant`` overrides everything else; ``symbol_shutdown`` mutes both PA
    terms while it holds.
    """

    carriers: tuple[CarrierState, ...]
    m_active: int
    symbol_shutdown: bool = False
    dormant: bool = False

    def __post_init__(self):
        object.__setattr__(self, "carriers", tuple(self.carriers))
        if self.m_active < 0:
            raise ValueError(f"m_active must be non-negative, got {self.m_active}")
        if len(self.carriers) == 0:
            raise ValueError("a state needs at least one carrier slot")


@dataclass(frozen=True)
class HourlyActivity:
    """Piecewise-constant operating points covering one hour.

    ``segments`` is a sequence of (state, fraction) pairs; fractions are
    non-negative and sum to 1 within 1e-9.
    """

    segments: tuple[tuple[AAUState, float], ...]

    def __post_init__(self):
        segs = tuple((state, float(frac)) for state, frac in self.segments)
        object.__setattr__(self, "segments", segs)
        if len(segs) == 0:
            raise ValueError("an hour needs at least one segment")
        if any(frac < 0 for _, frac in segs):
            raise ValueError("segment fractions must be non-negative")
        total = sum(frac for _, frac in segs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"segment fractions must sum to 1 (got {total!r})")


def transmit_power(carrier: CarrierState) -> float:
    """Transmit power of one carrier: ``p_max * prb_load``, 0 when inactive."""
    if not carrier.active:
        return 0.0
    return carrier.p_max * carrier.prb_load


def instantaneous_power(params: AnalyticalParams, state: AAUState) -> float:
    """Evaluate the analytical model at one operating point.

    Args:
        params: Fitted constants of the AAU type.
        state: Operating point; ``state.carriers`` must match the type's
            carrier count and order (``params.carrier_map`` pairs them up).

    Returns:
        Normalized power, strictly positive for any valid ``params``.

    Raises:
        ValueError: If the carrier counts differ, or ``state.m_active``
            exceeds the largest per-transceiver chain count.
    """
    if len(state.carriers) != params.num_carriers:
        raise ValueError(
            f"state has {len(state.carriers)} carriers but params describe "
            f"{params.num_carriers}"
        )
    m_cap = max(params.m_available)
    if state.m_active > m_cap:
        raise ValueError(f"m_active {state.m_active} exceeds available chains {m_cap}")

    if state.dormant:
        return params.p0

    power = params.p0 + params.p_bb

    # A transceiver stays powered while any carrier it serves is active.
    tran_has_traffic = [False] * params.num_transceivers
    for t, carrier in zip(params.carrier_map, state.carriers):
        if carrier.active:
            tran_has_traffic[t] = True
    for t, busy in enumerate(tran_has_traffic):
        if busy:
            power += params.m_available[t] * params.d_tran[t]

    if any(tran_has_traffic) and not state.symbol_shutdown:
        power += state.m_active * params.d_pa
        power += sum(transmit_power(c) for c in state.carriers) / params.eta

    return power


def hourly_energy(params: AnalyticalParams, activity: HourlyActivity) -> float:
    """Time-weighted mean power over one hour of piecewise-constant activity."""
    return sum(
        frac * instantaneous_power(params, state) for state, frac in activity.segments
    )


def reference_state(params: AnalyticalParams) -> AAUState:
    """Fully-active zero-load state: all carriers on, all chains powered."""
    carriers = tuple(
        CarrierState(active=True, prb_load=0.0, p_max=0.0) for _ in params.carrier_map
    )
    return AAUState(carriers=carriers, m_active=max(params.m_available))


def savings_fraction(params: AnalyticalParams, state: AAUState) -> float:
    """Relative saving of ``state`` versus the fully-active zero-load state.

    Returns ``1 - P(state) / P(reference)``; raises ValueError when the
    reference power is zero (degenerate all-zero parameters).
    """
    p_ref = instantaneous_power(params, reference_state(params))
    if p_ref == 0.0:
        raise ValueError("reference power is zero; savings fraction undefined")
    return 1.0 - instantaneous_power(params, state) / p_ref


def legacy_linear_model(static_power: float, slope: float, total_transmit_power: float) -> float:
    """Shutdown-unaware affine baseline: ``static + slope * total_tx``."""
    if static_power < 0:
        raise ValueError("static_power must be non-negative")
    if slope <= 0:
        raise ValueError("slope must be positive")
    if total_transmit_power < 0:
        raise ValueError("total transmit power must be non-negative")
    return static_power + slope * total_transmit_power
