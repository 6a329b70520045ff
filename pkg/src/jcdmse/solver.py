"""Damped fixed-point iteration over the replica map, with multi-start
basin detection, parameter sweeps and phase-transition localisation.

A solve runs the one-round Jacobi map from each requested initialisation
until the largest change of any unpinned MSE entry drops below ``tol``
(the MSEs are the primitive iterate; the effective SNRs are recomputed
from them).  Converged results from different starts are deduplicated and
the physical one is selected by largest free entropy, or, when
``sigma2 == 0`` makes the free entropy undefined, by smallest total MSE
among non-degenerate states (falling back to the degenerate noiseless
state when it is the only solution).  Newly proposed MSEs can be blended
with the previous iterate (``damping``) to tame oscillatory regions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .replica import (
    N_PHASES,
    OrderParams,
    Scenario,
    _qtilde_arrays,
    free_entropy,
    update_mse,
)

__all__ = [
    "SolverConfig",
    "FixedPointResult",
    "TransitionReport",
    "SweepPoint",
    "pin",
    "solve",
    "select_result",
    "sweep",
    "set_axis",
    "locate_transition",
]

ORACLE_NUDGE = 1e-12
DEDUP_FACTOR = 10.0


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    damping   blend factor in [0, 1): new = (1-d)*proposed + d*previous
    tol       convergence threshold on the max absolute MSE change per round
    max_iter  iteration cap; exceeding it flags the result, no exception
    inits     named starts: "ignorance", "oracle", or OrderParams instances
    """

    damping: float = 0.0
    tol: float = 1e-10
    max_iter: int = 10_000
    inits: tuple = ("ignorance", "oracle")

    def __post_init__(self):
        if not (0.0 <= self.damping < 1.0):
            raise ValueError(f"damping must be in [0, 1), got {self.damping!r}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter!r}")
        if not self.inits:
            raise ValueError("need at least one initialisation")


@dataclass(frozen=True)
class FixedPointResult:
    """One converged (or capped) run of the fixed-point iteration."""

    params: OrderParams
    iterations: int
    residual: float
    phi: float | None
    converged: bool
    init_label: str
    degenerate: bool

    def total_mse(self) -> float:
        return float(np.sum(self.params.mse_H) + np.sum(self.params.mse_X))


@dataclass(frozen=True)
class TransitionReport:
    """Bracketed discontinuity of the selected MSE along a sweep axis."""

    sweep_axis: str
    bracket: tuple
    jump_size: float
    resolved_to: float
    mse_low: float
    mse_high: float


@dataclass(frozen=True)
class SweepPoint:
    value: float
    results: tuple
    selected: FixedPointResult | None
    selection_rule: str


def _validate_pins(scenario: Scenario, pins: dict | None) -> dict:
    pins = dict(pins or {})
    cX = scenario.symbol_powers()
    for key, value in pins.items():
        if key[0] == "H":
            c = key[1]
            if not 0 <= c < scenario.n_cells:
                raise IndexError(f"pin references cell {c} out of range")
            cap = scenario.G[c]
        elif key[0] == "X":
            c, t = key[1], key[2]
            if not (0 <= c < scenario.n_cells and 0 <= t < N_PHASES):
                raise IndexError(f"pin references (cell, phase) ({c}, {t}) out of range")
            cap = cX[c, t]
        else:
            raise ValueError(f"pin key must start with 'H' or 'X', got {key!r}")
        if not (0.0 <= value <= cap + 1e-12):
            raise ValueError(f"pin value {value!r} for {key!r} outside [0, {cap}]")
    return pins


def pin(scenario: Scenario, params: OrderParams, assignments: dict) -> OrderParams:
    """Return params with the listed MSE entries frozen at the given values.

    Keys are ("H", c) or ("X", c, t); values must lie in [0, prior power].
    """
    assignments = _validate_pins(scenario, assignments)
    mse_H = np.array(params.mse_H)
    mse_X = np.array(params.mse_X)
    for key, value in assignments.items():
        if key[0] == "H":
            mse_H[key[1]] = value
        else:
            mse_X[key[1], key[2]] = value
    return OrderParams(mse_H, mse_X, params.qtilde_H, params.qtilde_X)


def _unpinned_masks(scenario: Scenario, pins: dict):
    mask_H = np.ones(scenario.n_cells, dtype=bool)
    mask_X = np.ones((scenario.n_cells, N_PHASES), dtype=bool)
    for key in pins:
        if key[0] == "H":
            mask_H[key[1]] = False
        else:
            mask_X[key[1], key[2]] = False
    return mask_H, mask_X


def _initial_params(scenario: Scenario, init, pins: dict) -> tuple:
    """Build (label, OrderParams) for a named or custom initialisation."""
    if isinstance(init, OrderParams):
        label = "custom"
        mse_H = np.array(init.mse_H)
        mse_X = np.array(init.mse_X)
    elif init == "ignorance":
        label = "ignorance"
        mse_H = np.array(scenario.G, dtype=float)
        mse_X = scenario.symbol_powers()
    elif init == "oracle":
        label = "oracle"
        mse_H = np.full(scenario.n_cells, ORACLE_NUDGE)
        mse_X = np.full((scenario.n_cells, N_PHASES), ORACLE_NUDGE)
    else:
        raise ValueError(f"unknown initialisation {init!r}")
    for key, value in pins.items():
        if key[0] == "H":
            mse_H[key[1]] = value
        else:
            mse_X[key[1], key[2]] = value
    qH, qX, _ = _qtilde_arrays(scenario, mse_H, mse_X)
    return label, OrderParams(mse_H, mse_X, qH, qX)


def _iterate(scenario: Scenario, start: OrderParams, config: SolverConfig,
             pins: dict, label: str) -> FixedPointResult:
    mask_H, mask_X = _unpinned_masks(scenario, pins)
    d = config.damping
    params = start
    residual = math.inf
    iterations = 0
    converged = False
    for iterations in range(1, config.max_iter + 1):
        proposed = update_mse(scenario, params, pins)
        # residual of the undamped map, so a converged state is a genuine
        # fixed point at tol regardless of the damping used to reach it
        changes = []
        if mask_H.any():
            changes.append(np.max(np.abs(proposed.mse_H[mask_H] - params.mse_H[mask_H])))
        if mask_X.any():
            changes.append(np.max(np.abs(proposed.mse_X[mask_X] - params.mse_X[mask_X])))
        residual = float(max(changes)) if changes else 0.0
        new_H = (1.0 - d) * proposed.mse_H + d * params.mse_H
        new_X = (1.0 - d) * proposed.mse_X + d * params.mse_X
        params = OrderParams(new_H, new_X, proposed.qtilde_H, proposed.qtilde_X)
        if residual <= config.tol:
            converged = True
            break
    if converged and scenario.sigma2 == 0.0:
        params = _snap_noiseless_perfect(scenario, params, config, mask_H, mask_X)
    # make the snapshot self-consistent: SNRs recomputed from the final MSEs
    qH, qX, _ = _qtilde_arrays(scenario, params.mse_H, params.mse_X)
    params = OrderParams(params.mse_H, params.mse_X, qH, qX)
    phi = None
    if scenario.sigma2 > 0.0 and not params.degenerate:
        phi = free_entropy(scenario, params, pins)
    return FixedPointResult(params, iterations, residual, phi, converged,
                            label, params.degenerate)


def _snap_noiseless_perfect(scenario: Scenario, params: OrderParams,
                            config: SolverConfig, mask_H, mask_X) -> OrderParams:
    """Replace a sigma2 == 0 iterate that has contracted onto the noiseless
    perfect state by its exact limit.

    Toward that state the map only shrinks the remaining error geometrically,
    so the tol-based stop leaves O(tol)-sized residual MSEs; the true fixed
    point has them exactly zero with the +inf SNR sentinel.  The snap is kept
    only when it really produces the sentinel state (some denominator vanishes
    after zeroing), which also makes the snapped state an exact fixed point.
    """
    thr_H = 1e3 * config.tol * np.maximum(1.0, np.asarray(scenario.G))
    thr_X = 1e3 * config.tol * np.maximum(1.0, scenario.symbol_powers())
    near_H = params.mse_H[mask_H] <= thr_H[mask_H] if mask_H.any() else np.array([True])
    near_X = params.mse_X[mask_X] <= thr_X[mask_X] if mask_X.any() else np.array([True])
    if not (np.all(near_H) and np.all(near_X)):
        return params
    mse_H = np.where(mask_H, 0.0, params.mse_H)
    mse_X = np.where(mask_X, 0.0, params.mse_X)
    qH, qX, degenerate = _qtilde_arrays(scenario, mse_H, mse_X)
    if not degenerate:
        return params
    return OrderParams(mse_H, mse_X, qH, qX)


def _same_fixed_point(a: FixedPointResult, b: FixedPointResult, tol: float) -> bool:
    lim = DEDUP_FACTOR * tol
    if np.max(np.abs(a.params.mse_H - b.params.mse_H)) > lim:
        return False
    if np.max(np.abs(a.params.mse_X - b.params.mse_X)) > lim:
        return False
    for qa, qb in ((a.params.qtilde_H, b.params.qtilde_H),
                   (a.params.qtilde_X, b.params.qtilde_X)):
        inf_a, inf_b = np.isinf(qa), np.isinf(qb)
        if np.any(inf_a != inf_b):
            return False
        fin = ~inf_a
        if np.any(np.abs(qa[fin] - qb[fin]) > lim * (1.0 + np.abs(qb[fin]))):
            return False
    return True


def solve(scenario: Scenario, config: SolverConfig | None = None,
          pins: dict | None = None) -> list:
    """Run the fixed-point iteration from every configured start.

    Returns one FixedPointResult per distinct basin (deduplicated across
    initialisations, first-found label kept).  Non-convergence within
    ``max_iter`` flags the result instead of raising.
    """
    config = config or SolverConfig()
    pins = _validate_pins(scenario, pins)
    results = []
    count = 0
    for init in config.inits:
        label, start = _initial_params(scenario, init, pins)
        if label == "custom":
            label = f"custom{count}"
            count += 1
        results.append(_iterate(scenario, start, config, pins, label))
    deduped = []
    for r in results:
        if not any(r.converged and s.converged and _same_fixed_point(r, s, config.tol)
                   for s in deduped):
            deduped.append(r)
    return deduped


def select_result(results, scenario: Scenario) -> FixedPointResult | None:
    """Pick the physical fixed point among converged results.

    sigma2 > 0: largest free entropy.  sigma2 == 0: smallest total MSE
    among non-degenerate states; the degenerate noiseless state is chosen
    only when no non-degenerate solution exists.
    """
    converged = [r for r in results if r.converged]
    if not converged:
        return None
    if scenario.sigma2 > 0.0:
        return max(converged, key=lambda r: r.phi if r.phi is not None else -math.inf)
    regular = [r for r in converged if not r.degenerate]
    pool = regular if regular else converged
    return min(pool, key=lambda r: r.total_mse())


def _selection_rule(scenario: Scenario) -> str:
    return "free_entropy" if scenario.sigma2 > 0.0 else "min_total_mse"


VALID_AXES = "alpha, sigma2, beta, beta1, beta2, G.<cell>, Gamma.<phase>"


def set_axis(scenario: Scenario, axis: str, value: float) -> Scenario:
    """Return a copy of the scenario with one swept parameter replaced.

    ``beta`` keeps beta1 and adjusts beta2; ``Gamma.<t>`` rescales the
    phase-t priors of every cell to the new power.
    """
    value = float(value)
    if axis == "alpha":
        return replace(scenario, alpha=value)
    if axis == "sigma2":
        return replace(scenario, sigma2=value)
    if axis == "beta1":
        return replace(scenario, beta1=value)
    if axis == "beta2":
        return replace(scenario, beta2=value)
    if axis == "beta":
        return replace(scenario, beta2=value - scenario.beta1)
    if axis.startswith("G."):
        c = int(axis[2:])
        if not 0 <= c < scenario.n_cells:
            raise ValueError(f"axis {axis!r}: cell index out of range")
        G = list(scenario.G)
        G[c] = value
        return replace(scenario, G=tuple(G))
    if axis.startswith("Gamma."):
        t = int(axis[6:])
        if not 0 <= t < N_PHASES:
            raise ValueError(f"axis {axis!r}: phase index out of range")
        priors = [list(row) for row in scenario.priors]
        for row in priors:
            row[t] = row[t].with_power(value)
        return replace(scenario, priors=tuple(tuple(row) for row in priors))
    raise ValueError(f"unknown sweep axis {axis!r}; valid: {VALID_AXES}")


def sweep(scenario: Scenario, axis: str, grid, config: SolverConfig | None = None,
          pins: dict | None = None, warm_start: bool = False) -> list:
    """Solve along a grid of axis values and select per point.

    With ``warm_start`` the previous point's selected solution seeds the
    next point in addition to the standard initialisations (sequential by
    construction).
    """
    config = config or SolverConfig()
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("sweep grid must be non-empty")
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("sweep grid must be strictly monotone")
    points = []
    previous = None
    for value in grid:
        scn = set_axis(scenario, axis, value)
        cfg = config
        if warm_start and previous is not None:
            cfg = replace(config, inits=tuple(config.inits) + (previous.params,))
        results = solve(scn, cfg, pins)
        selected = select_result(results, scn)
        points.append(SweepPoint(value, tuple(results), selected, _selection_rule(scn)))
        if selected is not None:
            previous = selected
    return points


def _selected_observable(scenario: Scenario, axis: str, value: float,
                         config: SolverConfig, pins: dict | None,
                         observable: tuple) -> float:
    scn = set_axis(scenario, axis, value)
    results = solve(scn, config, pins)
    selected = select_result(results, scn)
    if selected is None:  # fall back to the closest-to-converged state
        selected = min(results, key=lambda r: r.residual)
    if observable[0] == "H":
        return float(selected.params.mse_H[observable[1]])
    return float(selected.params.mse_X[observable[1], observable[2]])


def locate_transition(scenario: Scenario, axis: str, bracket, config: SolverConfig | None = None,
                      pins: dict | None = None, jump_threshold: float = 0.1,
                      width_target: float = 1e-4,
                      observable: tuple = ("X", 0, 1)) -> TransitionReport | None:
    """Bisect a discontinuity of the selected MSE along ``axis``.

    The observable defaults to the target cell's data-phase symbol MSE.
    Each midpoint is assigned to the branch whose end value it is closer
    to; a smooth curve therefore ends with a sub-threshold difference and
    reports no transition (None).  Returns a TransitionReport when the
    final bracket of width <= ``width_target`` still carries a jump larger
    than ``jump_threshold``.
    """
    config = config or SolverConfig()
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo > hi:
        raise ValueError(f"bracket must satisfy low <= high, got ({lo}, {hi})")
    if lo == hi:
        return None
    f = lambda v: _selected_observable(scenario, axis, v, config, pins, observable)
    f_lo, f_hi = f(lo), f(hi)
    if abs(f_hi - f_lo) <= jump_threshold:
        return None
    while hi - lo > width_target:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid - f_lo) <= abs(f_mid - f_hi):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    jump = abs(f_hi - f_lo)
    if jump <= jump_threshold:
        return None
    return TransitionReport(axis, (lo, hi), jump, hi - lo, f_lo, f_hi)
