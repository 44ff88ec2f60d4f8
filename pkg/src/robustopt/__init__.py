"""Oracle-based robust convex optimization.

Feasibility meta-algorithms that drive per-constraint noise vectors by
online (stochastic) subgradient ascent while repeatedly calling an
optimization oracle for the fixed-noise problem, together with an
l1-sampling stochastic subgradient oracle whose charged query costs
follow the sampling / norm-estimation cost model, and robust LP / SDP
applications (worst-case portfolio selection, truss topology design)
under ellipsoidal uncertainty.
"""

from .core import (
    Bounds,
    NoiseMemory,
    ParameterError,
    QueryLedger,
    RobustProblem,
    RunOutcome,
    UncertaintySet,
    compute_horizon,
    compute_step_size,
    effective_G2sq,
)
from .projections import (
    NumericalError,
    SetDescriptor,
    dykstra_project,
    project_ball,
    project_l1_ball,
    project_psd_frobenius,
    project_simplex,
)
from .sampling import (
    ExactSubgradientOracle,
    L1Distribution,
    NormEstimate,
    PerturbationModel,
    QueryCostModel,
    SampledGradient,
    SampledSubgradientOracle,
    assemble_stochastic_gradient,
    build_l1_distribution,
    draw_samples,
    estimate_l1_norm,
    exact_gradient_oracle,
)
from .ogd import OgdTrace, ball_linear_maximizer, measure_regret, run_osgd
from .inner_oracle import (
    LpFeasibilityOracle,
    OracleBudgetError,
    OracleConfig,
    OracleResult,
    SdpFeasibilityOracle,
    oracle_for_lp,
    oracle_for_sdp,
    subgradient_feasibility_oracle,
)
from .applications import (
    GmrpInstance,
    RobustLpInstance,
    RobustSdpInstance,
    TtdInstance,
    build_gmrp,
    build_ttd,
    instance_from_json,
    instance_to_json,
    lp_constants,
    lp_problem,
    sdp_constants,
    sdp_problem,
    worst_case_lp_violation,
    worst_case_sdp_violation,
)
from .meta import (
    BisectionResult,
    BracketError,
    optimize_via_bisection,
    solve_robust,
    solve_robust_sampled,
)
from .harness import ExperimentConfig, ResultRow, run_experiment, scaling_study

__version__ = "0.1.0"
