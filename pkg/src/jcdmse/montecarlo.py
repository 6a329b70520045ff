"""Finite-size simulation of the multi-cell uplink and tractable baselines.

The received block is assembled exactly as

    Y = (1/sqrt(K)) * H @ X + W

with H holding one i.i.d. CN(0, G_c) column block per cell, X the stacked
per-cell symbol matrices drawn from the scenario priors (pilot blocks are
drawn once per trial and exposed as side information), and W i.i.d.
CN(0, sigma2).  Empirical MSEs follow the per-entry normalisations
|X_hat - X|^2 / (K_c T_t) and |H_hat - H|^2 / (K_c N).

Schemes (exact Bayes only where that is tractable):

* ``perfect_csi_lmmse``      data-phase LMMSE given the true H (exact
                             posterior mean for Gaussian symbol priors)
* ``pilot_mmse_channel``     single-cell channel LMMSE from the pilot block
* ``pilot_then_lmmse_data``  the pilot estimate plus its error statistic
                             reused for data-phase LMMSE
* ``svd_blind``              dominant left singular vectors of Y as the
                             signal subspace, ambiguity resolved by least
                             squares against the pilot block (approximate
                             stand-in for subspace-projection receivers)

Trials use independent substreams seeded by (seed, trial index), so runs
are reproducible bit for bit and may be evaluated in parallel (set the
JCDMSE_THREADS environment variable).  MSE accumulation uses compensated
summation.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .priors import GaussianPrior
from .replica import Scenario
from .scenarios import example2_pilot_only
from .solver import SolverConfig, select_result, solve

__all__ = [
    "McConfig",
    "McReport",
    "SystemDims",
    "SCHEMES",
    "system_dims",
    "generate_instance",
    "perfect_csi_lmmse",
    "pilot_mmse_channel",
    "pilot_then_lmmse_data",
    "svd_blind",
    "lmmse_posterior_mse",
    "run_mc",
]

SCHEMES = ("perfect_csi_lmmse", "pilot_mmse_channel", "pilot_then_lmmse_data", "svd_blind")


@dataclass(frozen=True)
class McConfig:
    """Finite-size run controls: user count, trial count, 64-bit seed, scheme."""

    K: int
    trials: int
    seed: int
    scheme: str

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K!r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; valid: {SCHEMES}")


@dataclass(frozen=True)
class SystemDims:
    """Integer system sizes realised from the scenario ratios."""

    K: int
    N: int
    T1: int
    T2: int
    K_cells: tuple

    @property
    def T(self) -> int:
        return self.T1 + self.T2

    def cell_rows(self, c: int) -> slice:
        lo = sum(self.K_cells[:c])
        return slice(lo, lo + self.K_cells[c])

    def phase_cols(self, t: int) -> slice:
        return slice(0, self.T1) if t == 0 else slice(self.T1, self.T)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def system_dims(scenario: Scenario, K: int) -> SystemDims:
    """Realise N, T_t and K_c from the ratios at user count K.

    Rounding is half-away-from-zero; the cell with the largest load
    fraction absorbs the rounding slack so the K_c always sum to K.
    A phase with beta_t == 0 has no symbols; any declared phase must
    realise at least one symbol.
    """
    N = _round_half_away(scenario.alpha * K)
    T1 = _round_half_away(scenario.beta1 * K)
    T2 = _round_half_away(scenario.beta2 * K)
    K_cells = [_round_half_away(kc * K) for kc in scenario.k]
    K_cells[int(np.argmax(scenario.k))] += K - sum(K_cells)
    if N < 1:
        raise ValueError(f"derived antenna count N={N} must be >= 1 (alpha*K too small)")
    for t, (beta_t, T_t) in enumerate(((scenario.beta1, T1), (scenario.beta2, T2))):
        if beta_t > 0.0 and T_t < 1:
            raise ValueError(f"phase {t + 1} has beta={beta_t} but rounds to {T_t} symbols")
    for c, (kc, Kc) in enumerate(zip(scenario.k, K_cells)):
        if kc > 0.0 and Kc < 1:
            raise ValueError(f"cell {c} has load {kc} but rounds to {Kc} users")
        if Kc < 0:
            raise ValueError(f"cell {c} rounds to a negative user count {Kc}")
    return SystemDims(K, N, T1, T2, tuple(K_cells))


@dataclass(frozen=True)
class Instance:
    """One realisation of (H, X, W, Y) plus its bookkeeping."""

    scenario: Scenario
    dims: SystemDims
    H: np.ndarray
    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray


def _complex_normal(rng, variance, size):
    s = math.sqrt(variance / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def generate_instance(scenario: Scenario, K: int, rng: np.random.Generator) -> Instance:
    """Draw one system realisation.  Sampling order is fixed (H by cell,
    then X by cell and phase, then W) so a given generator state always
    produces the same instance."""
    dims = system_dims(scenario, K)
    H = np.empty((dims.N, K), dtype=complex)
    X = np.empty((K, dims.T), dtype=complex)
    for c in range(scenario.n_cells):
        rows = dims.cell_rows(c)
        H[:, rows] = _complex_normal(rng, scenario.G[c], (dims.N, dims.K_cells[c]))
    for c in range(scenario.n_cells):
        rows = dims.cell_rows(c)
        for t in range(2):
            cols = dims.phase_cols(t)
            X[rows, cols] = scenario.priors[c][t].sample(rng, (dims.K_cells[c], cols.stop - cols.start))
    W = _complex_normal(rng, scenario.sigma2, (dims.N, dims.T)) if scenario.sigma2 > 0 \
        else np.zeros((dims.N, dims.T), dtype=complex)
    Y = (H @ X) / math.sqrt(K) + W
    return Instance(scenario, dims, H, X, W, Y)


@dataclass(frozen=True)
class TrialOutcome:
    """Per-trial empirical MSEs of the target cell (None where a scheme
    does not produce the quantity)."""

    mse_H: float | None = None
    mse_X: float | None = None
    flagged: bool = False


def _data_powers(instance: Instance) -> np.ndarray:
    """Per-user symbol power in the data phase, length K."""
    dims, scenario = instance.dims, instance.scenario
    p = np.empty(dims.K)
    for c in range(scenario.n_cells):
        p[dims.cell_rows(c)] = scenario.priors[c][1].second_moment()
    return p


def lmmse_data_estimate(H_eff: np.ndarray, Y_block: np.ndarray, powers: np.ndarray,
                        noise_var: float, K: int) -> np.ndarray:
    """Column-wise linear MMSE x_hat = P A^H (A P A^H + v I)^{-1} y with
    A = H_eff / sqrt(K).  Shared by the perfect-CSI and mismatched-CSI
    data stages."""
    A = H_eff / math.sqrt(K)
    N = A.shape[0]
    gram = (A * powers) @ A.conj().T + noise_var * np.eye(N)
    return (powers[:, None] * A.conj().T) @ np.linalg.solve(gram, Y_block)


def lmmse_posterior_mse(H: np.ndarray, powers: np.ndarray, noise_var: float, K: int) -> np.ndarray:
    """Per-user posterior error variance diag(P - P A^H (A P A^H + v I)^{-1} A P)
    of the column-wise linear-Gaussian model."""
    A = H / math.sqrt(K)
    N = A.shape[0]
    gram = (A * powers) @ A.conj().T + noise_var * np.eye(N)
    back = np.linalg.solve(gram, A * powers)
    diag = powers - np.real(np.sum((powers[:, None] * A.conj().T) * back.T, axis=1))
    return diag


def perfect_csi_lmmse(instance: Instance) -> TrialOutcome:
    """Data-phase estimate given the true channel of every cell.

    Exact Bayes only for Gaussian symbol priors; anything else raises.
    Reports the target cell's empirical data MSE.
    """
    scenario, dims = instance.scenario, instance.dims
    for c in range(scenario.n_cells):
        if not isinstance(scenario.priors[c][1], GaussianPrior):
            raise ValueError("perfect-CSI LMMSE is exact Bayes only for Gaussian data priors")
    cols = dims.phase_cols(1)
    Xhat = lmmse_data_estimate(instance.H, instance.Y[:, cols], _data_powers(instance),
                               scenario.sigma2, dims.K)
    rows = dims.cell_rows(0)
    err = Xhat[rows] - instance.X[rows, cols]
    n = dims.K_cells[0] * (cols.stop - cols.start)
    return TrialOutcome(mse_X=float(np.sum(np.abs(err) ** 2)) / n)


def _require_single_cell_pilots(instance: Instance, scheme: str):
    scenario = instance.scenario
    if scenario.n_cells != 1:
        raise ValueError(f"{scheme} is implemented for single-cell scenarios only")
    if not scenario.priors[0][0].known:
        raise ValueError(f"{scheme} needs a Known pilot-phase prior")
    if instance.dims.T1 < 1:
        raise ValueError(f"{scheme} needs a non-empty pilot block")


def _pilot_channel_stage(instance: Instance):
    """Row-wise linear MMSE of H from the pilot block; returns the estimate
    and the shared per-row posterior covariance."""
    scenario, dims = instance.scenario, instance.dims
    G = scenario.G[0]
    K = dims.K
    B = instance.X[:, dims.phase_cols(0)].T / math.sqrt(K)  # (T1, K)
    gram = G * (B @ B.conj().T) + scenario.sigma2 * np.eye(dims.T1)
    F = G * B.conj().T @ np.linalg.inv(gram)                # (K, T1)
    Hhat = (F @ instance.Y[:, dims.phase_cols(0)].T).T      # (N, K)
    cov = G * np.eye(K) - (F @ B) * G
    return Hhat, cov


def pilot_mmse_channel(instance: Instance) -> TrialOutcome:
    """Channel estimate from the pilot block alone (exact Bayes for the
    Gaussian channel prior and known pilots); empirical channel MSE."""
    _require_single_cell_pilots(instance, "pilot_mmse_channel")
    Hhat, _ = _pilot_channel_stage(instance)
    dims = instance.dims
    err = Hhat - instance.H
    return TrialOutcome(mse_H=float(np.sum(np.abs(err) ** 2)) / (dims.K * dims.N))


def pilot_then_lmmse_data(instance: Instance) -> TrialOutcome:
    """Pilot-based channel estimate, then data-phase LMMSE treating the
    estimate as the channel mean with the posterior error folded into the
    effective noise level."""
    _require_single_cell_pilots(instance, "pilot_then_lmmse_data")
    scenario, dims = instance.scenario, instance.dims
    if not isinstance(scenario.priors[0][1], GaussianPrior):
        raise ValueError("pilot_then_lmmse_data needs a Gaussian data prior")
    Hhat, cov = _pilot_channel_stage(instance)
    gamma2 = scenario.priors[0][1].second_moment()
    noise_eff = scenario.sigma2 + gamma2 * float(np.real(np.trace(cov))) / dims.K
    cols = dims.phase_cols(1)
    Xhat = lmmse_data_estimate(Hhat, instance.Y[:, cols], _data_powers(instance),
                               noise_eff, dims.K)
    err_X = Xhat - instance.X[:, cols]
    err_H = Hhat - instance.H
    return TrialOutcome(
        mse_H=float(np.sum(np.abs(err_H) ** 2)) / (dims.K * dims.N),
        mse_X=float(np.sum(np.abs(err_X) ** 2)) / (dims.K * (cols.stop - cols.start)),
    )


def svd_blind(instance: Instance, subspace_dim: int | None = None) -> TrialOutcome:
    """Subspace baseline: the dominant left singular vectors of Y span the
    signal-subspace estimate; the remaining square ambiguity is fitted by
    least squares against the known pilot block.  Data symbols are then
    estimated by LMMSE with the reconstructed channel, treating the other
    cells as extra white noise.  Trials with (near-)tied singular values
    at the subspace boundary are flagged but not discarded.
    """
    scenario, dims = instance.scenario, instance.dims
    K1 = dims.K_cells[0] if subspace_dim is None else int(subspace_dim)
    if K1 < 1:
        raise ValueError(f"subspace dimension must be >= 1, got {K1}")
    if K1 > min(dims.N, dims.T):
        raise ValueError(f"subspace dimension {K1} exceeds min(N, T) = {min(dims.N, dims.T)}")
    if not scenario.priors[0][0].known or dims.T1 < 1:
        raise ValueError("svd_blind needs a known, non-empty pilot block in the target cell")

    U, S, _ = np.linalg.svd(instance.Y, full_matrices=False)
    flagged = bool(len(S) > K1 and (S[K1 - 1] - S[K1]) <= 1e-10 * max(S[0], 1.0))
    U1 = U[:, :K1]

    rows = dims.cell_rows(0)
    pilots = instance.X[rows, dims.phase_cols(0)]
    M = U1.conj().T @ instance.Y[:, dims.phase_cols(0)]
    # least-squares ambiguity fit: (1/sqrt(K)) B @ pilots ~ M
    Bt, *_ = np.linalg.lstsq(pilots.T, math.sqrt(dims.K) * M.T, rcond=None)
    Hhat1 = U1 @ Bt.T

    gamma2 = scenario.priors[0][1].second_moment()
    other = sum(dims.K_cells[c] / dims.K * scenario.G[c] * gamma2
                for c in range(1, scenario.n_cells))
    powers = np.full(K1, gamma2)
    cols = dims.phase_cols(1)
    Xhat = lmmse_data_estimate(Hhat1, instance.Y[:, cols], powers,
                               scenario.sigma2 + other, dims.K)
    err_X = Xhat - instance.X[rows, cols]
    err_H = Hhat1 - instance.H[:, rows]
    n1 = dims.K_cells[0]
    return TrialOutcome(
        mse_H=float(np.sum(np.abs(err_H) ** 2)) / (n1 * dims.N),
        mse_X=float(np.sum(np.abs(err_X) ** 2)) / (n1 * (cols.stop - cols.start)),
        flagged=flagged,
    )


@dataclass(frozen=True)
class McReport:
    """Aggregated empirical MSEs with trial statistics and the matching
    replica predictions."""

    scheme: str
    K: int
    trials: int
    seed: int
    dims: SystemDims
    mse_H: float | None
    stderr_H: float | None
    mse_X: float | None
    stderr_X: float | None
    predicted_mse_H: float | None
    predicted_mse_X: float | None
    flagged_trials: int


def _mean_stderr(values):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, math.inf
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _replica_prediction(scenario: Scenario, scheme: str):
    """(predicted mse_H, predicted mse_X) for the scheme, from the
    asymptotic fixed point with the matching side-information pins."""
    cfg = SolverConfig()
    cX = scenario.symbol_powers()
    if scheme == "perfect_csi_lmmse":
        pins = {("H", c): 0.0 for c in range(scenario.n_cells)}
        sel = select_result(solve(scenario, cfg, pins), scenario)
        return None, float(sel.params.mse_X[0, 1]) if sel else None
    if scheme == "pilot_mmse_channel":
        pins = {("X", 0, 1): float(cX[0, 1])}
        sel = select_result(solve(scenario, cfg, pins), scenario)
        return (float(sel.params.mse_H[0]) if sel else None), None
    if scheme == "pilot_then_lmmse_data":
        staged = example2_pilot_only(
            alpha=scenario.alpha, beta1=scenario.beta1, beta2=scenario.beta2,
            sigma2=scenario.sigma2, G=scenario.G[0],
            Gamma1=float(cX[0, 0]), Gamma2=float(cX[0, 1]),
            data_prior=scenario.priors[0][1], config=cfg)
        return staged.mse_H, staged.mse_X2
    # svd_blind has no asymptotic curve of its own; attach the full
    # joint-estimation prediction as the reference lower bound
    sel = select_result(solve(scenario, cfg), scenario)
    if sel is None:
        return None, None
    return float(sel.params.mse_H[0]), float(sel.params.mse_X[0, 1])


_SCHEME_FNS = {
    "perfect_csi_lmmse": perfect_csi_lmmse,
    "pilot_mmse_channel": pilot_mmse_channel,
    "pilot_then_lmmse_data": pilot_then_lmmse_data,
    "svd_blind": svd_blind,
}


def _worker_count() -> int:
    raw = os.environ.get("JCDMSE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_mc(scenario: Scenario, config: McConfig, attach_prediction: bool = True) -> McReport:
    """Run ``config.trials`` independent instances of the scheme.

    Trial i uses the substream seeded by (config.seed, i); aggregation is
    order-independent compensated summation, so results are identical for
    any worker count.
    """
    fn = _SCHEME_FNS[config.scheme]

    def one_trial(i: int) -> TrialOutcome:
        rng = np.random.default_rng([config.seed, i])
        return fn(generate_instance(scenario, config.K, rng))

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one_trial, range(config.trials)))
    else:
        outcomes = [one_trial(i) for i in range(config.trials)]

    vals_H = [o.mse_H for o in outcomes if o.mse_H is not None]
    vals_X = [o.mse_X for o in outcomes if o.mse_X is not None]
    mse_H = stderr_H = mse_X = stderr_X = None
    if vals_H:
        mse_H, stderr_H = _mean_stderr(vals_H)
    if vals_X:
        mse_X, stderr_X = _mean_stderr(vals_X)
    pred_H = pred_X = None
    if attach_prediction:
        pred_H, pred_X = _replica_prediction(scenario, config.scheme)
    return McReport(
        scheme=config.scheme, K=config.K, trials=config.trials, seed=config.seed,
        dims=system_dims(scenario, config.K),
        mse_H=mse_H, stderr_H=stderr_H, mse_X=mse_X, stderr_X=stderr_X,
        predicted_mse_H=pred_H, predicted_mse_X=pred_X,
        flagged_trials=sum(1 for o in outcomes if o.flagged),
    )
