"""Distill analytical parameters from estimator predictions on a probe grid.

The analytical model is linear in (p0, p_bb, d_tran, d_pa, theta) once the
PA efficiency is reparameterized as theta = 1/eta, so the fit is a damped
(Levenberg-Marquardt) least-squares problem with non-negativity bounds and
theta >= 1.  A probe grid sweeps per-carrier loads crossed with mode
templates (dormant / all carriers off / symbol shutdown / active at full and
half chains, plus one solo mode per transceiver on multi-transceiver types
so their electronics constants separate).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .features import DEFAULT_SCHEMA, FeatureSchema, Normalizer, encode
from .power_model import AAUState, AnalyticalParams
from .telemetry import AAUCatalogEntry, Dataset, HourlyRecord, activity_from_record
from . import estimator


class IdentifiabilityError(ValueError):
    """The grid cannot separate some parameters; ``groups`` names each set."""

    def __init__(self, groups):
        self.groups = [tuple(g) for g in groups]
        joined = "; ".join("(" + ", ".join(g) + ")" for g in self.groups)
        super().__init__(
            f"grid does not identify all parameters; only jointly identifiable: {joined}"
        )


class ConvergenceError(RuntimeError):
    """Fit failed to converge; carries the residual norm and iteration count."""

    def __init__(self, residual_norm: float, iterations: int):
        self.residual_norm = residual_norm
        self.iterations = iterations
        super().__init__(
            f"fit did not converge after {iterations} iterations "
            f"(residual norm {residual_norm:.6g})"
        )


@dataclass(frozen=True)
class GridPoint:
    """One probe: the telemetry record fed to the estimator and the constant
    operating point it encodes."""

    record: HourlyRecord
    state: AAUState
    mode: str


@dataclass(frozen=True)
class FitGrid:
    entry: AAUCatalogEntry
    points: tuple[GridPoint, ...]

    @property
    def records(self):
        return tuple(p.record for p in self.points)

    @property
    def states(self):
        return tuple(p.state for p in self.points)

    def features(self, normalizer: Normalizer, schema: FeatureSchema = DEFAULT_SCHEMA):
        return np.array([encode(p.record, normalizer, schema) for p in self.points])

    def to_dataset(self, targets=None) -> Dataset:
        """Export the grid in the telemetry schema (targets as measured power)."""
        if targets is None:
            targets = np.zeros(len(self.points))
        if len(targets) != len(self.points):
            raise ValueError("one target per grid point required")
        from dataclasses import replace

        records = tuple(
            replace(p.record, measured_power=float(max(t, 0.0)))
            for p, t in zip(self.points, targets)
        )
        return Dataset(records=records, catalog=(self.entry,))


_BASE_MODES = ("dormant", "all_off", "symbol", "active_full", "active_half")

#: Load sweep ceiling per mode.  Power does not depend on load in the
#: non-transmitting modes, so their sweeps stay inside the load range those
#: modes realistically occur at -- the estimator is only queried near its
#: training distribution.  Transmitting modes sweep the full range (the
#: transmit term identifies 1/eta).
_MODE_LOAD_CEILING = {"dormant": 0.1, "all_off": 0.1, "symbol": 0.2}


def grid_modes(entry: AAUCatalogEntry) -> tuple:
    """Mode templates for a type; multi-transceiver types add solo modes."""
    modes = list(_BASE_MODES)
    if entry.num_transceivers > 1:
        modes.extend(f"tran_solo[{t}]" for t in range(entry.num_transceivers))
    return tuple(modes)


def build_grid(entry: AAUCatalogEntry, load_levels: int = 5) -> FitGrid:
    """Probe grid: cartesian per-carrier load product x mode templates.

    Size is ``load_levels ** num_carriers * len(grid_modes(entry))``;
    ``load_levels`` must be at least 2 so the transmit term varies.
    """
    if load_levels < 2:
        raise ValueError("load_levels must be at least 2")
    params = entry.params
    n = params.num_carriers
    unit = [float(v) for v in np.linspace(0.0, 1.0, load_levels)]
    modes = grid_modes(entry)

    points = []
    ts = 0
    aau_id = f"grid{entry.type_id:02d}"
    for mode in modes:
        offs = [0.0] * n
        chan = sym = dorm = 0.0
        if mode == "dormant":
            dorm = 1.0
        elif mode == "all_off":
            offs = [1.0] * n
        elif mode == "symbol":
            sym = 1.0
        elif mode == "active_half":
            chan = 1.0
        elif mode.startswith("tran_solo"):
            t = int(mode[len("tran_solo["):-1])
            offs = [0.0 if params.carrier_map[c] == t else 1.0 for c in range(n)]
        ceiling = _MODE_LOAD_CEILING.get(mode, 1.0)
        levels = [u * ceiling for u in unit]
        for combo in itertools.product(levels, repeat=n):
            record = HourlyRecord(
                timestamp=ts,
                aau_id=aau_id,
                type_id=entry.type_id,
                carriers=entry.carrier_configs,
                prb_load=combo,
                carrier_off_frac=tuple(offs),
                channel_off_frac=chan,
                symbol_off_frac=sym,
                dormancy_frac=dorm,
                measured_power=0.0,
            )
            activity = activity_from_record(record, entry)
            if len(activity.segments) != 1:  # pragma: no cover - by construction
                raise RuntimeError("grid record does not encode a constant state")
            points.append(GridPoint(record=record, state=activity.segments[0][0], mode=mode))
            ts += 1
    return FitGrid(entry=entry, points=tuple(points))


# --------------------------------------------------------------------------
# Linear design


def param_names(m_available, carrier_map=None) -> tuple:
    names = ["p0", "p_bb"]
    names.extend(f"d_tran[{t}]" for t in range(len(m_available)))
    names.extend(["d_pa", "eta"])
    return tuple(names)


def design_matrix(states, m_available, carrier_map) -> np.ndarray:
    """Rows of per-parameter multipliers for [p0, p_bb, d_tran..., d_pa, theta]."""
    m_available = tuple(int(v) for v in m_available)
    carrier_map = tuple(int(v) for v in carrier_map)
    num_tran = len(m_available)
    p = 2 + num_tran + 2
    A = np.zeros((len(states), p))
    for i, state in enumerate(states):
        A[i, 0] = 1.0
        if state.dormant:
            continue
        A[i, 1] = 1.0
        busy = [False] * num_tran
        for t, carrier in zip(carrier_map, state.carriers):
            if carrier.active:
                busy[t] = True
        for t, on in enumerate(busy):
            if on:
                A[i, 2 + t] = m_available[t]
        if any(busy) and not state.symbol_shutdown:
            A[i, 2 + num_tran] = state.m_active
            A[i, 3 + num_tran] = sum(
                c.p_max * c.prb_load for c in state.carriers if c.active
            )
    return A


def _null_space_groups(A, names):
    """Name the parameter combinations spanned by the design null space."""
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    cutoff = (s[0] if s.size else 0.0) * 1e-10
    groups = []
    for k in range(A.shape[1]):
        sv = s[k] if k < s.size else 0.0
        if sv <= cutoff:
            v = vt[k]
            members = [names[j] for j in range(len(names)) if abs(v[j]) > 1e-8]
            groups.append(tuple(members))
    return groups


def _check_rank(A, names):
    groups = _null_space_groups(A, names)
    if groups:
        raise IdentifiabilityError(groups)


def _params_from_phi(phi, m_available, carrier_map) -> AnalyticalParams:
    num_tran = len(m_available)
    theta = phi[3 + num_tran]
    if theta <= 0:
        raise IdentifiabilityError([("eta",)])
    # Absorb pure float noise; anything materially negative is a real failure.
    vals = np.array(phi, dtype=float)
    tiny = vals[: 3 + num_tran]
    tiny[(tiny < 0) & (tiny > -1e-12)] = 0.0
    return AnalyticalParams(
        p0=float(vals[0]),
        p_bb=float(vals[1]),
        d_tran=tuple(float(v) for v in vals[2:2 + num_tran]),
        d_pa=float(vals[2 + num_tran]),
        eta=float(min(1.0 / theta, 1.0)),
        m_available=tuple(m_available),
        carrier_map=tuple(carrier_map),
    )


def closed_form_check(targets, states, m_available, carrier_map) -> AnalyticalParams:
    """Independent least-squares solution of the same linear system (oracle).

    Unlike :func:`fit_params` this applies no damping, no iteration, and no
    bound projection; it raises :class:`IdentifiabilityError` when the grid
    is rank-deficient or the solution implies a non-positive 1/eta (for
    example all-zero targets).
    """
    targets = np.asarray(targets, dtype=float)
    A = design_matrix(states, m_available, carrier_map)
    if targets.shape != (A.shape[0],):
        raise ValueError("one target per state required")
    names = param_names(m_available)
    _check_rank(A, names)
    phi, *_ = np.linalg.lstsq(A, targets, rcond=None)
    return _params_from_phi(phi, m_available, carrier_map)


# --------------------------------------------------------------------------
# Levenberg-Marquardt fit


@dataclass(frozen=True)
class FitResult:
    params: AnalyticalParams
    residual_norm: float
    iterations: int
    converged: bool
    standard_errors: dict
    residual_history: tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "params": self.params.to_json_dict(),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "standard_errors": dict(sorted(self.standard_errors.items())),
            "residual_history": list(self.residual_history),
        }


def save_fit_result(result: FitResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _heuristic_phi0(targets, states, m_available):
    """Mode-based starting point: dormant rows give p0, carrier-off rows give
    p_bb, symbol rows give the transceiver budget; eta starts at 0.3."""
    num_tran = len(m_available)
    dorm, alloff, sym, full = [], [], [], []
    m_cap = max(m_available)
    for i, s in enumerate(states):
        active = any(c.active for c in s.carriers)
        if s.dormant:
            dorm.append(i)
        elif not active:
            alloff.append(i)
        elif s.symbol_shutdown:
            sym.append(i)
        elif s.m_active == m_cap:
            full.append(i)
    p0 = float(np.mean(targets[dorm])) if dorm else 0.1
    p0 = max(p0, 1e-3)
    p_bb = max(float(np.mean(targets[alloff])) - p0, 1e-3) if alloff else 0.1
    budget = max(float(np.mean(targets[sym])) - p0 - p_bb, 1e-3) if sym else 0.1
    d_tran = [budget / (num_tran * m) for m in m_available]
    theta = 1.0 / 0.3
    d_pa = 1e-3
    if full:
        tx = np.array(
            [sum(c.p_max * c.prb_load for c in states[i].carriers if c.active) for i in full]
        )
        resid = float(np.mean(targets[full])) - (p0 + p_bb + budget) - theta * float(np.mean(tx))
        d_pa = max(resid / m_cap, 1e-4)
    phi = np.array([p0, p_bb, *d_tran, d_pa, theta])
    return phi


def fit_params(
    targets,
    states,
    init: AnalyticalParams | None = None,
    *,
    m_available=None,
    carrier_map=None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> FitResult:
    """Fit analytical parameters to grid targets by damped least squares.

    The topology (``m_available``, ``carrier_map``) comes from ``init`` when
    given, otherwise from the keyword arguments.  Damping starts at 1e-3 and
    shrinks tenfold on accepted steps (grows tenfold on rejected ones);
    iterates are kept feasible (non-negative powers, 1/eta >= 1) by pinning
    violated parameters at their bound and re-solving for the rest.

    Raises:
        IdentifiabilityError: rank-deficient grid (names the joint groups).
        ConvergenceError: tolerance not reached within ``max_iter``.
    """
    if init is not None:
        m_available = init.m_available
        carrier_map = init.carrier_map
    if m_available is None or carrier_map is None:
        raise ValueError("topology required: pass init or m_available + carrier_map")
    m_available = tuple(int(v) for v in m_available)
    carrier_map = tuple(int(v) for v in carrier_map)

    targets = np.asarray(targets, dtype=float)
    A = design_matrix(states, m_available, carrier_map)
    n, p = A.shape
    if targets.shape != (n,):
        raise ValueError("one target per state required")
    if n < p:
        raise ValueError(f"need at least {p} grid points, got {n}")
    names = param_names(m_available)
    _check_rank(A, names)
    # A non-positive unconstrained 1/eta means the targets carry no usable
    # transmit-power signal (e.g. a constant estimator); pinning it at the
    # bound would silently return an all-zero model instead.
    unconstrained, *_ = np.linalg.lstsq(A, targets, rcond=None)
    if unconstrained[-1] <= 0:
        raise IdentifiabilityError([("eta",)])

    lb = np.zeros(p)
    lb[-1] = 1.0  # theta = 1/eta; eta <= 1
    if init is not None:
        phi = np.array(
            [init.p0, init.p_bb, *init.d_tran, init.d_pa, 1.0 / init.eta]
        )
    else:
        phi = _heuristic_phi0(targets, states, m_available)
    phi = np.maximum(phi, lb)

    AtA = A.T @ A
    diag = np.maximum(np.diag(AtA), 1e-12)
    r = targets - A @ phi
    cost = float(r @ r)
    history = [float(np.sqrt(cost))]
    lam = 1e-3
    converged = False
    iterations = 0

    for _ in range(max_iter):
        iterations += 1
        cand = _bounded_step(A, AtA, diag, targets, phi, r, lam, lb)
        r_new = targets - A @ cand
        cost_new = float(r_new @ r_new)
        if cost_new < cost or cost_new == cost == 0.0:
            step = float(np.linalg.norm(cand - phi))
            rel_impr = (cost - cost_new) / max(cost, 1e-300)
            phi, r, cost = cand, r_new, cost_new
            history.append(float(np.sqrt(cost)))
            lam = max(lam * 0.1, 1e-12)
            if rel_impr < tol or step <= tol * (float(np.linalg.norm(phi)) + tol):
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                # Numerically stationary: no damped step can improve.
                converged = True
                break

    residual_norm = float(np.sqrt(cost))
    if not converged:
        raise ConvergenceError(residual_norm=residual_norm, iterations=iterations)

    params = _params_from_phi(phi, m_available, carrier_map)
    errors = _standard_errors(A, cost, phi, names)
    return FitResult(
        params=params,
        residual_norm=residual_norm,
        iterations=iterations,
        converged=True,
        standard_errors=errors,
        residual_history=tuple(history),
    )


def _bounded_step(A, AtA, diag, targets, phi, r, lam, lb):
    """One damped step, pinning bound-violating parameters and re-solving."""
    p = A.shape[1]
    delta = np.linalg.solve(AtA + lam * np.diag(diag), A.T @ r)
    cand = phi + delta
    if np.all(cand >= lb):
        return cand
    fixed = cand < lb
    for _ in range(p):
        free = ~fixed
        if not free.any():
            return lb.copy()
        pinned = np.where(fixed, lb, 0.0)
        r_free = targets - A[:, fixed] @ lb[fixed] - A[:, free] @ phi[free]
        Af = A[:, free]
        delta_f = np.linalg.solve(
            Af.T @ Af + lam * np.diag(diag[free]), Af.T @ r_free
        )
        cand = pinned.copy()
        cand[free] = phi[free] + delta_f
        newly = cand < lb - 1e-15
        if not newly.any():
            return np.maximum(cand, lb)
        fixed |= newly
    return np.maximum(cand, lb)


def _standard_errors(A, cost, phi, names):
    """Per-parameter standard errors from the linear-model covariance;
    eta's is mapped from theta's by the delta method."""
    n, p = A.shape
    if n <= p:
        return {name: float("nan") for name in names}
    sigma2 = cost / (n - p)
    cov = sigma2 * np.linalg.inv(A.T @ A)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    errors = {}
    for j, name in enumerate(names):
        if name == "eta":
            theta = phi[j]
            errors[name] = float(se[j] / theta**2) if theta > 0 else float("nan")
        else:
            errors[name] = float(se[j])
    return errors


# --------------------------------------------------------------------------
# End-to-end convenience


def distill_from_estimator(
    weights,
    normalizer: Normalizer,
    entry: AAUCatalogEntry,
    load_levels: int = 5,
    schema: FeatureSchema = DEFAULT_SCHEMA,
    tol: float = 1e-10,
    max_iter: int = 100,
):
    """Build the probe grid, query the estimator, and fit parameters.

    Returns ``(FitResult, FitGrid, targets)``.
    """
    grid = build_grid(entry, load_levels=load_levels)
    X = grid.features(normalizer, schema)
    means, _ = estimator.predict(weights, X)
    result = fit_params(
        means,
        grid.states,
        m_available=entry.m_available,
        carrier_map=entry.params.carrier_map,
        tol=tol,
        max_iter=max_iter,
    )
    return result, grid, means
