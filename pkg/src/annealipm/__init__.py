"""Membership-oracle convex optimization toolkit.

Simulated annealing with Hit-and-Run sampling and damped-Newton barrier
path following over one body abstraction, plus the machinery to verify
that the two methods trace the same curve when the barrier is the
entropic one.
"""

from .annealing import (
    AnnealReport,
    EpochDiagnostics,
    SamplerConfig,
    Schedule,
    anneal,
    epoch_diagnostics,
    make_schedule,
)
from .bodies import (
    Chord,
    ConvexBody,
    chord,
    contains,
    estimate_diameter,
    support_min,
)
from .boltzmann import (
    BoltzmannParams,
    MomentSummary,
    bregman_divergence,
    check_isotropy,
    l2_ratio_norm,
    l2_ratio_pair,
    log_partition,
    moments,
)
from .equivalence import (
    PathComparison,
    SampledHeatConfig,
    central_path,
    compare_paths,
    default_temperature_grid,
    heat_path,
    reweighting_update,
)
from .ipm import (
    BarrierEval,
    EntropicBarrier,
    LogBarrier,
    NewtonState,
    SampledStepConfig,
    barrier_eval,
    damped_newton_step,
    dual_parameter_solve,
    follow_path,
    initial_path_point,
    newton_decrement,
    sampled_newton_direction,
    sampled_newton_step,
)
from .records import PathPoint
from .walker import (
    ChainState,
    WalkStats,
    derive_rng,
    hit_and_run_step,
    make_chain_state,
    run_chain,
    sample_batch,
    sample_chord_position,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealReport",
    "BarrierEval",
    "BoltzmannParams",
    "ChainState",
    "Chord",
    "ConvexBody",
    "EntropicBarrier",
    "EpochDiagnostics",
    "LogBarrier",
    "MomentSummary",
    "NewtonState",
    "PathComparison",
    "PathPoint",
    "SampledHeatConfig",
    "SampledStepConfig",
    "SamplerConfig",
    "Schedule",
    "WalkStats",
    "anneal",
    "barrier_eval",
    "bregman_divergence",
    "central_path",
    "check_isotropy",
    "chord",
    "compare_paths",
    "contains",
    "damped_newton_step",
    "default_temperature_grid",
    "derive_rng",
    "dual_parameter_solve",
    "epoch_diagnostics",
    "estimate_diameter",
    "follow_path",
    "heat_path",
    "hit_and_run_step",
    "initial_path_point",
    "l2_ratio_norm",
    "l2_ratio_pair",
    "log_partition",
    "make_chain_state",
    "make_schedule",
    "moments",
    "newton_decrement",
    "reweighting_update",
    "run_chain",
    "sample_batch",
    "sample_chord_position",
    "sampled_newton_direction",
    "sampled_newton_step",
    "support_min",
]
