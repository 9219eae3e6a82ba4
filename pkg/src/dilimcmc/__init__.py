"""Dimension-robust likelihood-informed MCMC for Bayesian inverse problems
over discretized functions.

The package is organized around whitened coordinates in which the Gaussian
prior is standard normal:

- :mod:`dilimcmc.prior`       prior factors and whitening maps,
- :mod:`dilimcmc.forward`     the forward-model contract (misfit, gradient,
  Gauss-Newton Hessian actions),
- :mod:`dilimcmc.lowrank`     likelihood-informed subspace construction,
- :mod:`dilimcmc.proposals`   the operator-weighted proposal family,
- :mod:`dilimcmc.samplers`    fixed and adaptive chain drivers,
- :mod:`dilimcmc.problems`    benchmark inverse problems,
- :mod:`dilimcmc.diagnostics` mixing diagnostics,
- :mod:`dilimcmc.runner` / :mod:`dilimcmc.cli`  experiment orchestration.
"""

from .config import ExperimentConfig, load_config, parse_config
from .diagnostics import (
    DiagnosticsReport,
    autocorrelation,
    batch_means_se,
    diagnose,
    effective_sample_size,
    integrated_autocorrelation_time,
    lag1_by_component,
)
from .forward import (
    ForwardModel,
    ForwardSolveError,
    LinearModel,
    ModelEvaluation,
    ObservationSet,
    gradient_fd_check,
    jacobian_fd_check,
)
from .lowrank import (
    ExpectedGnhState,
    LowRankCovariance,
    RunningCovariance,
    forstner_distance,
    local_gnh_eig,
    local_laplace_cov,
    project_cov,
    read_lis_file,
    update_cov,
    update_lis,
    write_lis_file,
)
from .prior import (
    FunctionVector,
    PriorFactor,
    build_factor,
    brownian_covariance,
    exponential_kernel,
    onsager_machlup,
)
from .problems import (
    DiffusionModel,
    EllipticModel,
    SyntheticProblem,
    diffusion_problem,
    elliptic_problem,
)
from .proposals import (
    ProposalOperators,
    acceptance_log_ratio,
    acceptance_log_ratio_simplified,
    build_h_langevin,
    build_li_langevin,
    build_li_prior,
    build_mgli,
    build_pcn,
    condition4_sum,
    propose,
    validate,
)
from .runner import (
    read_samples_file,
    read_trace_csv,
    run_experiment,
    write_samples_file,
    write_trace_csv,
)
from .samplers import (
    AdaptationSchedule,
    ChainRecord,
    MapResult,
    map_estimate,
    mh_step,
    run_adaptive_dili,
    run_adaptive_mwg,
    run_fixed,
)

__version__ = "0.1.0"
