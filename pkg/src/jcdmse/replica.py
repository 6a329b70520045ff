"""Order-parameter state and one-round update maps of the asymptotic analysis.

The large-system limit of the Bayes-optimal joint channel/data estimator is
characterised by scalar order parameters per cell ``c`` and phase ``t``:

* ``mse_H[c]``   -- channel MSE, in [0, G_c]
* ``mse_X[c,t]`` -- symbol MSE, in [0, Gamma_{c,t}]
* ``qtilde_H[c]``, ``qtilde_X[c,t]`` -- effective SNRs of the decoupled
  scalar channels whose MMSE reproduces those MSEs.

One full round (a Jacobi sweep) computes all interference residues from the
current MSEs, then all effective SNRs, then all MSEs from the new SNRs.
The free-entropy functional evaluated at a fixed point ranks coexisting
solutions: the one with the largest value is the physical one.

Conventions:

* The channel prior of cell ``c`` is CN(0, G_c) throughout, so the channel
  MMSE kernel is the Gaussian closed form.
* A phase with ``beta_t == 0`` carries no symbols; it contributes nothing
  to any sum and its per-phase quantities are vacuous.
* With ``sigma2 == 0`` a denominator can only vanish in the fully resolved
  state (all interference gone); the update maps then return ``+inf`` as a
  sentinel which the MMSE kernels map back to zero error.  Such states are
  flagged as degenerate.  The free entropy is undefined at ``sigma2 == 0``.
* Entries pinned by the caller (side information, e.g. perfect CSI) keep
  their value through updates and are excluded from the mutual-information
  and mse*qtilde sums of the free entropy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .priors import GaussianPrior, Prior

__all__ = [
    "Scenario",
    "OrderParams",
    "delta",
    "update_qtilde_H",
    "update_qtilde_X",
    "update_mse",
    "free_entropy",
]

N_PHASES = 2


@dataclass(frozen=True)
class Scenario:
    """Full parameterisation of the multi-cell uplink in ratio form.

    k       per-cell load fractions K_c/K (sum to 1)
    alpha   antenna ratio N/K
    beta1   pilot-phase ratio T_1/K
    beta2   data-phase ratio T_2/K
    sigma2  noise variance (0 allowed for interference-limited probes)
    G       per-cell large-scale fading powers
    priors  per-(cell, phase) symbol priors
    """

    k: tuple
    alpha: float
    beta1: float
    beta2: float
    sigma2: float
    G: tuple
    priors: tuple

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        object.__setattr__(self, "G", tuple(float(v) for v in self.G))
        object.__setattr__(self, "priors", tuple(tuple(row) for row in self.priors))
        if not self.k:
            raise ValueError("need at least one cell")
        if abs(sum(self.k) - 1.0) > 1e-12:
            raise ValueError(f"load fractions must sum to 1 within 1e-12, got {sum(self.k)!r}")
        if any(v < 0.0 for v in self.k):
            raise ValueError(f"load fractions must be >= 0, got {self.k}")
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if self.beta1 < 0.0 or self.beta2 < 0.0:
            raise ValueError(f"phase ratios must be >= 0, got ({self.beta1!r}, {self.beta2!r})")
        if self.beta1 + self.beta2 <= 0.0:
            raise ValueError("block ratio beta1 + beta2 must be positive")
        if self.sigma2 < 0.0 or not math.isfinite(self.sigma2):
            raise ValueError(f"sigma2 must be >= 0 and finite, got {self.sigma2!r}")
        if len(self.G) != len(self.k) or any(not (g > 0.0) for g in self.G):
            raise ValueError(f"need one positive fading power per cell, got {self.G}")
        if len(self.priors) != len(self.k) or any(len(row) != N_PHASES for row in self.priors):
            raise ValueError("priors must be one pair (pilot phase, data phase) per cell")
        for row in self.priors:
            for p in row:
                if not isinstance(p, Prior):
                    raise ValueError(f"priors must be Prior instances, got {type(p).__name__}")

    @property
    def n_cells(self) -> int:
        return len(self.k)

    @property
    def beta(self) -> float:
        return self.beta1 + self.beta2

    @property
    def beta_t(self) -> tuple:
        return (self.beta1, self.beta2)

    def channel_prior(self, c: int) -> GaussianPrior:
        return GaussianPrior(self.G[c])

    def symbol_powers(self) -> np.ndarray:
        """Second moments of the symbol priors, shape (C, 2)."""
        return np.array([[p.second_moment() for p in row] for row in self.priors])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class OrderParams:
    """Immutable snapshot of the order parameters for one round."""

    mse_H: np.ndarray
    mse_X: np.ndarray
    qtilde_H: np.ndarray
    qtilde_X: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mse_H", _frozen(self.mse_H))
        object.__setattr__(self, "mse_X", _frozen(self.mse_X))
        object.__setattr__(self, "qtilde_H", _frozen(self.qtilde_H))
        object.__setattr__(self, "qtilde_X", _frozen(self.qtilde_X))

    def validate(self, scenario: Scenario):
        C = scenario.n_cells
        if self.mse_H.shape != (C,) or self.mse_X.shape != (C, N_PHASES):
            raise ValueError("order-parameter arrays have wrong shape")
        if self.qtilde_H.shape != (C,) or self.qtilde_X.shape != (C, N_PHASES):
            raise ValueError("order-parameter arrays have wrong shape")
        G = np.asarray(scenario.G)
        cX = scenario.symbol_powers()
        if np.any(self.mse_H < 0) or np.any(self.mse_H > G + 1e-12):
            raise ValueError(f"mse_H out of [0, G]: {self.mse_H}")
        if np.any(self.mse_X < 0) or np.any(self.mse_X > cX + 1e-12):
            raise ValueError(f"mse_X out of [0, Gamma]: {self.mse_X}")
        if np.any(np.isnan(self.qtilde_H)) or np.any(self.qtilde_H < 0):
            raise ValueError(f"qtilde_H must be >= 0: {self.qtilde_H}")
        if np.any(np.isnan(self.qtilde_X)) or np.any(self.qtilde_X < 0):
            raise ValueError(f"qtilde_X must be >= 0: {self.qtilde_X}")

    @property
    def degenerate(self) -> bool:
        """True when some effective SNR hit the noiseless +inf sentinel."""
        return bool(np.any(np.isinf(self.qtilde_H)) or np.any(np.isinf(self.qtilde_X)))


def interference_residues(scenario: Scenario, mse_H: np.ndarray, mse_X: np.ndarray) -> np.ndarray:
    """Residual interference power of each (cell, phase), shape (C, 2)."""
    G = np.asarray(scenario.G)
    cX = scenario.symbol_powers()
    return mse_H[:, None] * cX + mse_X * (G[:, None] - mse_H[:, None])


def delta(scenario: Scenario, params: OrderParams, c: int, t: int) -> float:
    """Residual interference power Delta contributed by cell c in phase t."""
    C = scenario.n_cells
    if not (0 <= c < C and 0 <= t < N_PHASES):
        raise IndexError(f"cell/phase index ({c}, {t}) out of range for C={C}")
    return float(interference_residues(scenario, params.mse_H, params.mse_X)[c, t])


def _qtilde_arrays(scenario: Scenario, mse_H: np.ndarray, mse_X: np.ndarray):
    """Both effective-SNR families from the current MSEs.

    Returns (qtilde_H, qtilde_X, degenerate).  A zero phase denominator
    (possible only at sigma2 == 0 with all residues gone) yields +inf.
    """
    k = np.asarray(scenario.k)
    G = np.asarray(scenario.G)
    cX = scenario.symbol_powers()
    beta_t = scenario.beta_t
    dlt = interference_residues(scenario, mse_H, mse_X)
    denom = scenario.sigma2 + k @ dlt  # shape (2,)

    C = scenario.n_cells
    qH = np.zeros(C)
    qX = np.zeros((C, N_PHASES))
    degenerate = False
    for t in range(N_PHASES):
        num_X = scenario.alpha * (G - mse_H)
        num_H = beta_t[t] * (cX[:, t] - mse_X[:, t])
        if denom[t] > 0.0:
            qX[:, t] = num_X / denom[t]
            if beta_t[t] > 0.0:
                qH += num_H / denom[t]
        else:
            degenerate = True
            qX[:, t] = np.where(num_X > 0.0, np.inf, 0.0)
            if beta_t[t] > 0.0:
                qH = qH + np.where(num_H > 0.0, np.inf, 0.0)
    return qH, qX, degenerate


def update_qtilde_H(scenario: Scenario, params: OrderParams, c: int) -> float:
    """Effective channel-estimation SNR of cell c from the current MSEs."""
    if not 0 <= c < scenario.n_cells:
        raise IndexError(f"cell index {c} out of range")
    qH, _, _ = _qtilde_arrays(scenario, params.mse_H, params.mse_X)
    return float(qH[c])


def update_qtilde_X(scenario: Scenario, params: OrderParams, c: int, t: int) -> float:
    """Effective data-estimation SNR of (cell c, phase t) from the current MSEs."""
    if not (0 <= c < scenario.n_cells and 0 <= t < N_PHASES):
        raise IndexError(f"cell/phase index ({c}, {t}) out of range")
    _, qX, _ = _qtilde_arrays(scenario, params.mse_H, params.mse_X)
    return float(qX[c, t])


def update_mse(scenario: Scenario, params: OrderParams, pins: dict | None = None) -> OrderParams:
    """One full round of the fixed-point map (Jacobi sweep).

    All interference residues and effective SNRs are computed from the
    incoming MSEs, then every MSE is refreshed through its scalar MMSE
    kernel at the new SNR.  Entries listed in ``pins`` keep their pinned
    value.  The returned snapshot carries the SNRs used for the refresh.
    """
    qH, qX, _ = _qtilde_arrays(scenario, params.mse_H, params.mse_X)
    C = scenario.n_cells
    new_H = np.empty(C)
    new_X = np.empty((C, N_PHASES))
    for c in range(C):
        new_H[c] = scenario.channel_prior(c).mmse(qH[c])
        for t in range(N_PHASES):
            new_X[c, t] = scenario.priors[c][t].mmse(qX[c, t])
    if pins:
        for key, value in pins.items():
            if key[0] == "H":
                new_H[key[1]] = value
            else:
                new_X[key[1], key[2]] = value
    return OrderParams(new_H, new_X, qH, qX)


def free_entropy(scenario: Scenario, params: OrderParams, pins: dict | None = None) -> float:
    """Replica-symmetric free entropy of a state, in nats.

    Used only to rank coexisting fixed points (larger wins); the constant
    -alpha*beta offset is kept for transparency.  Pinned entries are side
    information: they enter the interference residues but contribute no
    uncertainty terms.  Requires sigma2 > 0.
    """
    if scenario.sigma2 <= 0.0:
        raise ValueError("free entropy is undefined at sigma2 = 0; rank by total MSE instead")
    pins = pins or {}
    k = np.asarray(scenario.k)
    alpha = scenario.alpha
    beta_t = scenario.beta_t
    dlt = interference_residues(scenario, params.mse_H, params.mse_X)
    load = (k @ dlt) / scenario.sigma2  # shape (2,)

    val = -alpha * sum(beta_t[t] * math.log1p(load[t]) for t in range(N_PHASES))
    val -= alpha * scenario.beta
    for c in range(scenario.n_cells):
        if ("H", c) not in pins:
            qh = float(params.qtilde_H[c])
            val += alpha * k[c] * (params.mse_H[c] * qh
                                   - scenario.channel_prior(c).mutual_information(qh))
        for t in range(N_PHASES):
            if beta_t[t] == 0.0 or ("X", c, t) in pins:
                continue
            prior = scenario.priors[c][t]
            if prior.known:
                continue  # pilots carry no uncertainty
            qx = float(params.qtilde_X[c, t])
            val += beta_t[t] * k[c] * (params.mse_X[c, t] * qx
                                       - prior.mutual_information(qx))
    return float(val)
