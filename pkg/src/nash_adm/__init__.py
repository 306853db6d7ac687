"""Distributed Nash equilibrium seeking over communication graphs.

The package implements the accelerated direct method (ADM): projected
gradient play with operator extrapolation on estimation matrices, certified
step schedules for merely monotone and strongly monotone quadratic games,
the direct distributed procedure (DDP) and centralized gradient play as
baselines, and the diagnostics (gap function, consensus decomposition,
averaged iterates) the convergence guarantees are stated in.
"""

from .errors import ConfigError, InputError, InvariantError, NumericError
from .games import (
    BoxSet,
    Game,
    GameConstants,
    game_constants,
    game_from_dict,
    game_to_dict,
    generate_game,
    generate_rotational_game,
    lipschitz_constant,
    load_game,
    pseudo_gradient,
    save_game,
    strong_monotonicity_constant,
)
from .network import (
    MixingMatrix,
    contraction_factor,
    mixing_from_dict,
    mixing_matrix,
    mixing_to_dict,
    norm_i_minus_w,
    random_tree,
)
from .schedules import (
    ExplicitSchedule,
    MonotoneSchedule,
    ScheduleValidatorReport,
    StrongSchedule,
    extrapolation_margin,
    geometric_bound,
    max_monotone_step_scale,
    monotone_schedule,
    strong_schedule,
    validate_schedule,
)
from .algorithms import (
    AdmState,
    RunTrace,
    adm_step,
    augmented_pseudo_gradient,
    init_state,
    project_augmented,
    run_adm,
    run_centralized,
    run_ddp,
)
from .metrics import (
    ConsensusDecomposition,
    GapResult,
    averaged_iterate,
    best_response_gap,
    consensus_decompose,
    gap_function,
    relative_error,
)
from .harness import (
    ExperimentConfig,
    compare,
    emit_config,
    game_hash,
    load_config,
    parse_config,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AdmState",
    "BoxSet",
    "ConfigError",
    "ConsensusDecomposition",
    "ExperimentConfig",
    "ExplicitSchedule",
    "Game",
    "GameConstants",
    "GapResult",
    "InputError",
    "InvariantError",
    "MixingMatrix",
    "MonotoneSchedule",
    "NumericError",
    "RunTrace",
    "ScheduleValidatorReport",
    "StrongSchedule",
    "adm_step",
    "augmented_pseudo_gradient",
    "averaged_iterate",
    "best_response_gap",
    "compare",
    "consensus_decompose",
    "contraction_factor",
    "emit_config",
    "extrapolation_margin",
    "game_constants",
    "game_from_dict",
    "game_hash",
    "game_to_dict",
    "gap_function",
    "generate_game",
    "generate_rotational_game",
    "geometric_bound",
    "init_state",
    "lipschitz_constant",
    "load_config",
    "load_game",
    "max_monotone_step_scale",
    "mixing_from_dict",
    "mixing_matrix",
    "mixing_to_dict",
    "monotone_schedule",
    "norm_i_minus_w",
    "parse_config",
    "project_augmented",
    "pseudo_gradient",
    "random_tree",
    "relative_error",
    "run_adm",
    "run_centralized",
    "run_ddp",
    "run_experiment",
    "save_game",
    "strong_monotonicity_constant",
    "strong_schedule",
    "validate_schedule",
    "__version__",
]
