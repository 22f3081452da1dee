"""Quantile-thresholded Kaczmarz solvers for sparsely corrupted linear systems.

A library and CLI harness for overdetermined systems whose right-hand sides
carry a sparse fraction of arbitrarily large corruptions: residual-quantile
gated single-row and averaged-block solvers, the spectral quantities their
convergence rates depend on, closed-form rate evaluation with per-iteration
certification, and reproducible experiment sweeps.
"""

from .errors import (
    ConditionViolatedError,
    ConfigError,
    DivergedError,
    DomainError,
    EmptyInputError,
    IoError,
    NoConvergenceError,
    PreconditionViolatedError,
    ShapeError,
    SpecError,
    TooManySubsetsError,
    ZeroBaselineError,
    ZeroRowError,
)
from .linalg import (
    SUBSET_ENUMERATION_CAP,
    SpectralSummary,
    restricted_min_sv_bruteforce,
    restricted_min_sv_sampled,
    row_normalize,
    sigma_max_sq,
    sigma_min_sq,
)
from .problems import (
    CorruptedSystem,
    CorruptionSpec,
    GeneratorSpec,
    generate,
    generate_adversarial_duplicate,
    load_system,
    relative_error,
    save_system,
)
from .rates import (
    CertificateResult,
    RateReport,
    alpha_opt_closed_form,
    certify_iteration,
    convergence_condition,
    rate_constants,
    rate_report,
    resolve_alpha_auto,
    scaled_step_decrease,
)
from .solvers import (
    COMPARATORS,
    METHODS,
    IterationTrace,
    SolverConfig,
    averaged_rbk_step,
    quantile_abk_step,
    quantile_of_multiset,
    quantile_pbk_step,
    quantile_rk_step,
    residual,
    rk_step,
    sampled_qabk_step,
    solve,
)
from .harness import (
    ExperimentConfig,
    SweepResult,
    SweepSpec,
    adversarial_demo,
    compare_methods,
    empirical_alpha,
    run,
    start_vector,
    sweep_quantile,
    sweep_sample_size,
    sweep_step_size,
)

__version__ = "0.1.0"

__all__ = [
    "CertificateResult",
    "COMPARATORS",
    "ConditionViolatedError",
    "ConfigError",
    "CorruptedSystem",
    "CorruptionSpec",
    "DivergedError",
    "DomainError",
    "EmptyInputError",
    "ExperimentConfig",
    "GeneratorSpec",
    "IoError",
    "IterationTrace",
    "METHODS",
    "NoConvergenceError",
    "PreconditionViolatedError",
    "RateReport",
    "ShapeError",
    "SolverConfig",
    "SpecError",
    "SpectralSummary",
    "SUBSET_ENUMERATION_CAP",
    "SweepResult",
    "SweepSpec",
    "TooManySubsetsError",
    "ZeroBaselineError",
    "ZeroRowError",
    "adversarial_demo",
    "alpha_opt_closed_form",
    "averaged_rbk_step",
    "certify_iteration",
    "compare_methods",
    "convergence_condition",
    "empirical_alpha",
    "generate",
    "generate_adversarial_duplicate",
    "load_system",
    "quantile_abk_step",
    "quantile_of_multiset",
    "quantile_pbk_step",
    "quantile_rk_step",
    "rate_constants",
    "rate_report",
    "relative_error",
    "residual",
    "resolve_alpha_auto",
    "restricted_min_sv_bruteforce",
    "restricted_min_sv_sampled",
    "rk_step",
    "row_normalize",
    "run",
    "sampled_qabk_step",
    "save_system",
    "scaled_step_decrease",
    "sigma_max_sq",
    "sigma_min_sq",
    "solve",
    "start_vector",
    "sweep_quantile",
    "sweep_sample_size",
    "sweep_step_size",
]
