"""Sample-based planning for constrained MDPs with a generative model."""
from .core_mdp import (
    Cmdp,
    MixturePolicy,
    OccupancyMeasure,
    Policy,
    ValuePair,
    collapse_mixture,
    evaluate_policy,
    mixture_values,
    occupancy_measure,
    t1_cmdp,
    value_iteration,
)
from .errors import CmdpInputError, PlannerError
from .hard_instance import (
    HardInstanceParams,
    InstanceVariant,
    build_hard_instance,
    closed_form_optima,
    validate_params,
    verify_slater,
)
from .lp_oracle import CmdpSolution, lagrangian_value, slater_constant, solve_cmdp_exact
from .primal_dual import (
    DualTrace,
    EpsilonNet,
    PdConfig,
    PdResult,
    dual_regret,
    dual_step,
    gap_margin,
    make_epsilon_net,
    preset_relaxed,
    preset_strict,
    run_primal_dual,
)
from .sampling import EmpiricalModel, GenerativeModel, build_empirical_model
from .zeta_estimator import ZetaEstimate, estimate_zeta

__version__ = "0.1.0"
