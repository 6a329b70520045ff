"""Named scenario constructions and JSON scenario files.

The presets reproduce the standard single-cell and two-cell setups used to
validate the fixed-point analysis:

* ``example1_perfect_csi``      single cell, channel known exactly
* ``example2_pilot_only``       two-stage pilot-based scheme (channel from
                                pilots, then data with the frozen channel
                                error statistic)
* ``example2_jcd``              single-cell joint channel-and-data solve
* ``example3_two_cell``         target cell plus one interfering cell whose
                                pilots are unknown at the target receiver
* ``conventional_jcd_two_cell`` two-cell variant that ignores the
                                interfering cell, freezing its order
                                parameters at ignorance

Scenario files are JSON documents with keys
{cells, k, alpha, beta, beta1, sigma2, G, Gamma, priors, pins}.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

from .priors import DiscretePrior, GaussianPrior, KnownPrior, Prior, QpskPrior
from .replica import Scenario
from .solver import FixedPointResult, SolverConfig, _validate_pins, select_result, solve

__all__ = [
    "example1_perfect_csi",
    "example2_pilot_only",
    "example2_jcd",
    "example3_two_cell",
    "conventional_jcd_two_cell",
    "PilotOnlyResult",
    "make_prior",
    "load_scenario",
    "scenario_to_dict",
    "PRESETS",
]

NEGLIGIBLE_PILOT_FLOOR = 1e-6


def make_prior(kind: str, power: float, points=None, probs=None) -> Prior:
    """Build a symbol prior by family name."""
    kind = kind.lower()
    if kind == "gaussian":
        return GaussianPrior(power)
    if kind == "qpsk":
        return QpskPrior(power)
    if kind == "known":
        return KnownPrior(power)
    if kind == "discrete":
        if points is None or probs is None:
            raise ValueError("discrete prior needs explicit points and probs")
        return DiscretePrior(points, probs)
    raise ValueError(f"unknown prior kind {kind!r}; expected gaussian, qpsk, known or discrete")


def _check_beta1_floor(beta1: float):
    if 0.0 < beta1 < NEGLIGIBLE_PILOT_FLOOR:
        warnings.warn(
            f"beta1={beta1:g} is below {NEGLIGIBLE_PILOT_FLOOR:g}; the residual pilot "
            "needed to eliminate the factorisation ambiguity is no longer modelled",
            stacklevel=3,
        )


def example1_perfect_csi(alpha: float, sigma2: float = 1.0, G: float = 1.0,
                         prior: Prior | None = None, beta: float = 1.0):
    """Single cell with the channel known exactly: no pilot phase, channel
    MSE pinned to zero.  Returns (scenario, pins)."""
    prior = prior or GaussianPrior(1.0)
    scenario = Scenario(
        k=(1.0,), alpha=alpha, beta1=0.0, beta2=beta, sigma2=sigma2, G=(G,),
        priors=((KnownPrior(prior.second_moment()), prior),),
    )
    return scenario, {("H", 0): 0.0}


def example2_jcd(alpha: float, beta1: float = 1.0, beta2: float = 1.0,
                 sigma2: float = 1.0, G: float = 1.0, Gamma1: float = 1.0,
                 Gamma2: float = 1.0, data_prior: Prior | None = None):
    """Single-cell joint channel-and-data estimation with known pilots.

    ``beta1`` may be negligible (down to 1e-6 without warning); the pilots
    are represented by a Known prior so their MSE is identically zero.
    Returns (scenario, pins)."""
    if beta1 < 0.0:
        raise ValueError(f"beta1 must be >= 0, got {beta1!r}")
    _check_beta1_floor(beta1)
    data = data_prior.with_power(Gamma2) if data_prior is not None else GaussianPrior(Gamma2)
    scenario = Scenario(
        k=(1.0,), alpha=alpha, beta1=beta1, beta2=beta2, sigma2=sigma2, G=(G,),
        priors=((KnownPrior(Gamma1), data),),
    )
    return scenario, {}


@dataclass(frozen=True)
class PilotOnlyResult:
    """Outcome of the two-stage pilot-based scheme."""

    mse_H: float
    mse_X2: float
    stage1: FixedPointResult
    stage2: FixedPointResult


def example2_pilot_only(alpha: float, beta1: float = 1.0, beta2: float = 1.0,
                        sigma2: float = 1.0, G: float = 1.0, Gamma1: float = 1.0,
                        Gamma2: float = 1.0, data_prior: Prior | None = None,
                        config: SolverConfig | None = None) -> PilotOnlyResult:
    """Two-stage scheme: channel estimated from the pilot block alone, then
    the data block estimated with the channel error statistic frozen.

    Stage 1 removes the data contribution by pinning the data-phase MSE at
    its prior power; stage 2 pins the channel MSE at the stage-1 value and
    solves for the data MSE only.
    """
    if not beta1 > 0.0:
        raise ValueError("the pilot-only scheme needs beta1 > 0")
    config = config or SolverConfig()
    scenario, _ = example2_jcd(alpha, beta1, beta2, sigma2, G, Gamma1, Gamma2, data_prior)
    stage1_pins = {("X", 0, 1): scenario.priors[0][1].second_moment()}
    stage1 = select_result(solve(scenario, config, stage1_pins), scenario)
    if stage1 is None:
        raise RuntimeError("pilot-only stage 1 did not converge")
    mse_H = float(stage1.params.mse_H[0])
    stage2_pins = {("H", 0): mse_H}
    stage2 = select_result(solve(scenario, config, stage2_pins), scenario)
    if stage2 is None:
        raise RuntimeError("pilot-only stage 2 did not converge")
    return PilotOnlyResult(mse_H, float(stage2.params.mse_X[0, 1]), stage1, stage2)


def example3_two_cell(alpha: float, beta1: float = 1.0, beta2: float = 9.0,
                      sigma2: float = 0.1, G1: float = 1.0, G2: float = 0.1,
                      k1: float = 0.5, k2: float = 0.5, Gamma1: float = 1.0,
                      Gamma2: float = 1.0, data_prior: Prior | None = None):
    """Target cell plus one interfering cell.

    Only the target cell's pilot block is known at the receiver; the
    interfering cell transmits with the data prior in both phases (its
    pilot sequences are useless without being known).  Returns
    (scenario, pins)."""
    if abs(k1 + k2 - 1.0) > 1e-12:
        raise ValueError(f"load fractions must sum to 1, got {k1 + k2!r}")
    _check_beta1_floor(beta1)
    base = data_prior if data_prior is not None else GaussianPrior(1.0)
    d1, d2 = base.with_power(Gamma1), base.with_power(Gamma2)
    scenario = Scenario(
        k=(k1, k2), alpha=alpha, beta1=beta1, beta2=beta2, sigma2=sigma2,
        G=(G1, G2),
        priors=((KnownPrior(Gamma1), d2), (d1, d2)),
    )
    return scenario, {}


def conventional_jcd_two_cell(alpha: float, beta1: float = 1.0, beta2: float = 9.0,
                              sigma2: float = 0.1, G1: float = 1.0, G2: float = 0.1,
                              k1: float = 0.5, k2: float = 0.5, Gamma1: float = 1.0,
                              Gamma2: float = 1.0, data_prior: Prior | None = None):
    """Two-cell variant that ignores the interfering signal entirely.

    The interfering cell's order parameters are frozen at ignorance, which
    makes its interference residue the constant G2 * Gamma_t in each phase.
    Returns (scenario, pins)."""
    scenario, pins = example3_two_cell(alpha, beta1, beta2, sigma2, G1, G2,
                                       k1, k2, Gamma1, Gamma2, data_prior)
    pins = dict(pins)
    pins[("H", 1)] = G2
    pins[("X", 1, 0)] = Gamma1
    pins[("X", 1, 1)] = Gamma2
    return scenario, pins


PRESETS = {
    "example1": example1_perfect_csi,
    "example2_jcd": example2_jcd,
    "example3": example3_two_cell,
    "conventional_jcd": conventional_jcd_two_cell,
}

_SCHEMA_KEYS = {"cells", "k", "alpha", "beta", "beta1", "sigma2", "G", "Gamma", "priors", "pins"}


def _fail(msg: str):
    raise ValueError(f"scenario file: {msg}")


def _positive_number(doc, key):
    v = doc.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        _fail(f"key {key!r} must be a finite number, got {v!r}")
    return float(v)


def _number_list(doc, key, n, positive=True):
    v = doc.get(key)
    if not isinstance(v, list) or len(v) != n:
        _fail(f"key {key!r} must be a list of {n} numbers, got {v!r}")
    out = []
    for item in v:
        if not isinstance(item, (int, float)) or isinstance(item, bool):
            _fail(f"key {key!r} must contain numbers, got {item!r}")
        if positive and not item > 0:
            _fail(f"key {key!r} entries must be > 0, offending value {item!r}")
        out.append(float(item))
    return out


def _parse_prior_entry(entry, power, where):
    if isinstance(entry, str):
        if entry.lower() not in ("gaussian", "qpsk", "known"):
            _fail(f"{where}: unknown prior kind {entry!r}")
        return make_prior(entry, power)
    if isinstance(entry, dict):
        kind = entry.get("kind")
        if kind != "discrete":
            _fail(f"{where}: prior objects must have kind 'discrete', got {kind!r}")
        extra = set(entry) - {"kind", "points", "probs"}
        if extra:
            _fail(f"{where}: unknown prior key(s) {sorted(extra)}")
        try:
            pts = [complex(p[0], p[1]) for p in entry.get("points", [])]
            prior = DiscretePrior(pts, entry.get("probs", []))
        except (TypeError, IndexError, ValueError) as exc:
            _fail(f"{where}: invalid discrete prior ({exc})")
        if abs(prior.second_moment() - power) > 1e-9:
            _fail(f"{where}: discrete prior power {prior.second_moment()!r} "
                  f"does not match the declared phase power {power!r}")
        return prior
    _fail(f"{where}: prior must be a kind name or a discrete object, got {entry!r}")


def _parse_pins(doc, cells):
    pins = {}
    entries = doc.get("pins", [])
    if not isinstance(entries, list):
        _fail(f"key 'pins' must be a list, got {entries!r}")
    for i, e in enumerate(entries):
        if not isinstance(e, dict):
            _fail(f"pins[{i}] must be an object, got {e!r}")
        param = e.get("param")
        cell = e.get("cell")
        value = e.get("value")
        if param not in ("mse_H", "mse_X"):
            _fail(f"pins[{i}]: param must be 'mse_H' or 'mse_X', got {param!r}")
        if not isinstance(cell, int) or not 0 <= cell < cells:
            _fail(f"pins[{i}]: cell must be an index below {cells}, got {cell!r}")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
            _fail(f"pins[{i}]: value must be a number >= 0, got {value!r}")
        if param == "mse_H":
            allowed = {"param", "cell", "value"}
            key = ("H", cell)
        else:
            allowed = {"param", "cell", "phase", "value"}
            phase = e.get("phase")
            if not isinstance(phase, int) or not 0 <= phase < 2:
                _fail(f"pins[{i}]: phase must be 0 or 1, got {phase!r}")
            key = ("X", cell, phase)
        extra = set(e) - allowed
        if extra:
            _fail(f"pins[{i}]: unknown key(s) {sorted(extra)}")
        pins[key] = float(value)
    return pins


def load_scenario(source) -> tuple:
    """Parse and validate a scenario document (path, JSON text, or dict).

    Returns (scenario, pins).  Raises ValueError with the offending key and
    value on any schema violation; JSON syntax errors propagate with line
    and column information.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.loads(source.read())
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    if not isinstance(doc, dict):
        _fail(f"top level must be an object, got {type(doc).__name__}")
    unknown = set(doc) - _SCHEMA_KEYS
    if unknown:
        _fail(f"unknown key(s) {sorted(unknown)}; allowed keys are {sorted(_SCHEMA_KEYS)}")
    missing = _SCHEMA_KEYS - {"pins"} - set(doc)
    if missing:
        _fail(f"missing required key(s) {sorted(missing)}")

    cells = doc.get("cells")
    if not isinstance(cells, int) or isinstance(cells, bool) or cells < 1:
        _fail(f"key 'cells' must be a positive integer, got {cells!r}")
    k = _number_list(doc, "k", cells, positive=False)
    if any(v < 0 for v in k):
        _fail(f"key 'k' entries must be >= 0, offending value {min(k)!r}")
    if abs(sum(k) - 1.0) > 1e-12:
        _fail(f"key 'k' must sum to 1 within 1e-12, got sum {sum(k)!r}")
    alpha = _positive_number(doc, "alpha")
    beta = _positive_number(doc, "beta")
    beta1 = doc.get("beta1")
    if not isinstance(beta1, (int, float)) or isinstance(beta1, bool) or beta1 < 0:
        _fail(f"key 'beta1' must be a number >= 0, got {beta1!r}")
    beta1 = float(beta1)
    if beta1 > beta:
        _fail(f"key 'beta1' must not exceed beta={beta!r}, got {beta1!r}")
    sigma2 = doc.get("sigma2")
    if not isinstance(sigma2, (int, float)) or isinstance(sigma2, bool) or sigma2 < 0:
        _fail(f"key 'sigma2' must be a number >= 0, got {sigma2!r}")
    G = _number_list(doc, "G", cells)
    Gamma = _number_list(doc, "Gamma", 2)

    raw_priors = doc.get("priors")
    if not isinstance(raw_priors, list) or len(raw_priors) != cells:
        _fail(f"key 'priors' must be a list of {cells} per-cell pairs, got {raw_priors!r}")
    priors = []
    for c, row in enumerate(raw_priors):
        if not isinstance(row, list) or len(row) != 2:
            _fail(f"priors[{c}] must be a [pilot-phase, data-phase] pair, got {row!r}")
        priors.append(tuple(_parse_prior_entry(row[t], Gamma[t], f"priors[{c}][{t}]")
                            for t in range(2)))
    _check_beta1_floor(beta1)
    scenario = Scenario(k=tuple(k), alpha=alpha, beta1=beta1, beta2=beta - beta1,
                        sigma2=float(sigma2), G=tuple(G), priors=tuple(priors))
    pins = _parse_pins(doc, cells)
    _validate_pins(scenario, pins)
    return scenario, pins


def _prior_entry_to_json(prior: Prior):
    if isinstance(prior, GaussianPrior):
        return "gaussian"
    if isinstance(prior, QpskPrior):
        return "qpsk"
    if isinstance(prior, KnownPrior):
        return "known"
    if isinstance(prior, DiscretePrior):
        return {"kind": "discrete",
                "points": [[p.real, p.imag] for p in prior.points],
                "probs": list(prior.probs)}
    raise ValueError(f"cannot serialise prior {prior!r}")


def scenario_to_dict(scenario: Scenario, pins: dict | None = None) -> dict:
    """Inverse of load_scenario, for echoing configurations into outputs."""
    gamma = [scenario.priors[0][t].second_moment() for t in range(2)]
    doc = {
        "cells": scenario.n_cells,
        "k": list(scenario.k),
        "alpha": scenario.alpha,
        "beta": scenario.beta,
        "beta1": scenario.beta1,
        "sigma2": scenario.sigma2,
        "G": list(scenario.G),
        "Gamma": gamma,
        "priors": [[_prior_entry_to_json(p) for p in row] for row in scenario.priors],
    }
    if pins:
        entries = []
        for key, value in sorted(pins.items(), key=str):
            if key[0] == "H":
                entries.append({"param": "mse_H", "cell": key[1], "value": value})
            else:
                entries.append({"param": "mse_X", "cell": key[1], "phase": key[2], "value": value})
        doc["pins"] = entries
    return doc
