"""Asymptotic MSE analysis of Bayes-optimal joint channel-and-data
estimation for the multi-cell massive MIMO uplink, with scalar MMSE/mutual
information kernels, a damped fixed-point solver with free-entropy
selection, named scenario presets, and a finite-size Monte Carlo harness.
"""
from .priors import (
    DiscretePrior,
    GaussianPrior,
    KnownPrior,
    Prior,
    QpskPrior,
    scalar_mi,
    scalar_mmse,
    second_moment,
)
from .replica import (
    OrderParams,
    Scenario,
    delta,
    free_entropy,
    update_mse,
    update_qtilde_H,
    update_qtilde_X,
)
from .solver import (
    FixedPointResult,
    SolverConfig,
    TransitionReport,
    locate_transition,
    pin,
    select_result,
    set_axis,
    solve,
    sweep,
)
from .scenarios import (
    PRESETS,
    conventional_jcd_two_cell,
    example1_perfect_csi,
    example2_jcd,
    example2_pilot_only,
    example3_two_cell,
    load_scenario,
    make_prior,
)
from .montecarlo import (
    McConfig,
    McReport,
    generate_instance,
    perfect_csi_lmmse,
    pilot_mmse_channel,
    pilot_then_lmmse_data,
    run_mc,
    svd_blind,
    system_dims,
)

__version__ = "0.1.0"
