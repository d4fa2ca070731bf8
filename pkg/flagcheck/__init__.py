"""flagcheck - property checks and counterexample search for quantum resource measures."""

from flagcheck.channels import (
    Ensemble,
    KrausChannel,
    apply,
    embed_local,
    flagged_channel,
    is_free,
    is_incoherent,
    random_incoherent_channel,
    random_local_channel,
    selective_apply,
)
from flagcheck.checks import (
    CheckResult,
    audit_flag_equivalence,
    audit_theorem1,
    bridge_flag_violation_to_mono,
    bridge_mono_violation_to_flag,
    check_convexity,
    check_faithfulness,
    check_flag_additivity,
    check_flag_sub,
    check_flag_sup,
    check_free_padding,
    check_full_additivity,
    check_monotonicity,
    check_n_copy,
    check_omega_identity,
    check_sandwich,
    check_strong_mono,
    check_two_copy,
    continuity_ratio,
    estimate_regularization,
    run_property,
)
from flagcheck.config import Limits, RunConfig, SolverConfig, load_run_config
from flagcheck.errors import (
    ArgumentError,
    CapabilityError,
    CapacityError,
    DegenerateError,
    FlagCheckError,
    FormatError,
    InvariantError,
)
from flagcheck.flags import (
    FlagBasis,
    TypicalDecomposition,
    computational_flag_basis,
    flagged_state,
    omega,
    symmetrized_tensor,
    typical_decomposition,
    validate_flag_basis,
)
from flagcheck.measures import MEASURES, MeasureDescriptor, SolverReport, evaluate, get_measure
from flagcheck.progress import HAS_RICH, ProgressRenderer
from flagcheck.qstate import DensityMatrix, PureState, partial_trace, partial_transpose, tensor
from flagcheck.report import Report
from flagcheck.runner import SweepRunner
from flagcheck.search import SearchOutcome, search_violation

__all__ = [
    "DensityMatrix",
    "PureState",
    "tensor",
    "partial_trace",
    "partial_transpose",
    "KrausChannel",
    "Ensemble",
    "apply",
    "selective_apply",
    "is_incoherent",
    "is_free",
    "random_incoherent_channel",
    "random_local_channel",
    "embed_local",
    "flagged_channel",
    "MeasureDescriptor",
    "SolverReport",
    "MEASURES",
    "get_measure",
    "evaluate",
    "FlagBasis",
    "TypicalDecomposition",
    "validate_flag_basis",
    "computational_flag_basis",
    "flagged_state",
    "omega",
    "symmetrized_tensor",
    "typical_decomposition",
    "CheckResult",
    "run_property",
    "check_flag_additivity",
    "check_flag_sup",
    "check_flag_sub",
    "check_strong_mono",
    "check_monotonicity",
    "check_convexity",
    "check_two_copy",
    "check_n_copy",
    "check_full_additivity",
    "check_omega_identity",
    "check_free_padding",
    "check_faithfulness",
    "check_sandwich",
    "bridge_mono_violation_to_flag",
    "bridge_flag_violation_to_mono",
    "audit_flag_equivalence",
    "audit_theorem1",
    "estimate_regularization",
    "continuity_ratio",
    "SearchOutcome",
    "search_violation",
    "SweepRunner",
    "Report",
    "RunConfig",
    "SolverConfig",
    "Limits",
    "load_run_config",
    "ProgressRenderer",
    "HAS_RICH",
    "FlagCheckError",
    "ArgumentError",
    "InvariantError",
    "CapacityError",
    "CapabilityError",
    "DegenerateError",
    "FormatError",
]
