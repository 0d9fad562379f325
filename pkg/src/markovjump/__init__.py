"""Markov-modulated jump processes under Poisson scaling.

Simulates processes with locally independent increments driven by a
fast finite-state Markov switching environment, assembles their
averaged limit dynamics (piecewise deterministic, compound Poisson in
the balanced case), and quantifies the convergence empirically.
"""

from .averaging import (
    BalanceReport,
    LimitModel,
    PHI_CATALOG,
    PhiProbe,
    ResidualReport,
    assemble_limit,
    check_drift_balance,
    perturbation_residual,
)
from .conditions import validate_moment_bounds, validate_poisson_scaling
from .config import ModelBundle, dump_model, load_model, parse_model
from .errors import (
    ComputationError,
    EventBudgetError,
    MarkovJumpError,
    ModelError,
    ReducibleChainError,
)
from .jumps import (
    ConstDrift,
    Gaussian,
    GProbe,
    JumpModel,
    LinSatDrift,
    MixtureLaw,
    PointMass,
    PrelimitKernel,
    Uniform,
    default_probes,
    get_probe,
    kernel_g_moment,
    kernel_mean,
    kernel_second_moment,
    sq_tail,
)
from .simulate import (
    CharacteristicPaths,
    Trajectory,
    characteristic_terminals,
    predictable_characteristics,
    simulate_compound_poisson,
    simulate_limit,
    simulate_prelimit,
)
from .switching import (
    SwitchPath,
    SwitchSpec,
    build_generator,
    sample_switch_path,
    solve_poisson,
    stationary_distribution,
)
from .verify import (
    ConvergenceReport,
    EnsembleSummary,
    increment_ratio,
    ks_statistic,
    limit_ensemble,
    prelimit_ensemble,
    run_convergence_study,
    sup_tail_table,
    wasserstein1,
)

__version__ = "0.1.0"
