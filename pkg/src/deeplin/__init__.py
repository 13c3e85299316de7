"""Numerical laboratory for training dynamics of deep linear networks."""

from .errors import (
    ConfigError,
    DeeplinError,
    NoRealRootError,
    NumericError,
    SingularInputError,
)
from .factor import (
    FactorizationResult,
    PolarParts,
    balanced_factorization,
    polar,
    principal_root_orthogonal,
    principal_root_spd,
)
from .lab import (
    ScenarioConfig,
    ScenarioReport,
    TargetSpec,
    gamma_margin,
    load_scenario,
    make_target,
    random_orthogonal,
    read_matrix_csv,
    run_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    sweep,
    verify_all,
    write_matrix_csv,
    write_trace_csv,
)
from .matcore import (
    commutation_matrix,
    kron,
    op_norm,
    sigma_min,
    singular_values,
    skew,
    spectral,
    sym,
    unvec,
    vec,
)
from .network import (
    DeepLinearNet,
    end_to_end,
    full_gradient,
    full_hessian,
    layer_gradient,
    loss,
    partial_product,
)
from .project import (
    GammaPositiveSet,
    IdentityBall,
    project_gamma_positive,
    project_identity_ball,
)
from .trainers import (
    StepSchedule,
    TrainerConfig,
    TrainingTrace,
    run_gd,
    run_penalty_gd,
    run_power_projection,
    run_step_and_project,
    step_size_power_projection,
    step_size_symmetric_target,
)
from .verify import (
    CheckReport,
    check_commuting_normal,
    check_gradient_lower_bound,
    check_hessian_upper_bound,
    eigen_recurrence_check,
    fd_gradient_check,
    fd_hessian_check,
    simulate_scalar_recurrence,
    trace_recurrence_check,
)

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "ConfigError",
    "DeepLinearNet",
    "DeeplinError",
    "FactorizationResult",
    "GammaPositiveSet",
    "IdentityBall",
    "NoRealRootError",
    "NumericError",
    "PolarParts",
    "ScenarioConfig",
    "ScenarioReport",
    "SingularInputError",
    "StepSchedule",
    "TargetSpec",
    "TrainerConfig",
    "TrainingTrace",
    "balanced_factorization",
    "check_commuting_normal",
    "check_gradient_lower_bound",
    "check_hessian_upper_bound",
    "commutation_matrix",
    "eigen_recurrence_check",
    "end_to_end",
    "fd_gradient_check",
    "fd_hessian_check",
    "full_gradient",
    "full_hessian",
    "gamma_margin",
    "kron",
    "layer_gradient",
    "load_scenario",
    "loss",
    "make_target",
    "op_norm",
    "partial_product",
    "polar",
    "principal_root_orthogonal",
    "principal_root_spd",
    "project_gamma_positive",
    "project_identity_ball",
    "random_orthogonal",
    "read_matrix_csv",
    "run_gd",
    "run_penalty_gd",
    "run_power_projection",
    "run_scenario",
    "run_step_and_project",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "sigma_min",
    "simulate_scalar_recurrence",
    "singular_values",
    "skew",
    "spectral",
    "step_size_power_projection",
    "step_size_symmetric_target",
    "sweep",
    "sym",
    "trace_recurrence_check",
    "unvec",
    "vec",
    "verify_all",
    "write_matrix_csv",
    "write_trace_csv",
]
