"""Additive regression estimation and additivity testing under right censoring."""

from .additive import (
    AdditiveFit,
    ComponentCurve,
    DensitySpec,
    EvaluationRegion,
    IntegrationDensities,
    additive_fit,
    estimate_component,
)
from .errors import (
    AssumptionViolated,
    AxisOutOfRange,
    CensoringDegenerate,
    DensityFloorHit,
    EstimationError,
    GridTooCoarse,
    InfeasibleExponent,
    NonpositiveVariance,
    OrderInfeasible,
    UnknownFamily,
)
from .kernels import (
    Kernel1D,
    KernelConstants,
    KernelSet,
    ProductKernel,
    kernel_1d,
    kernel_constants,
    make_kernel_set,
    parse_kernel_spec,
    product_kernel,
)
from .pipeline import additivity_test
from .plan import AssumptionSpec, BandwidthPlan, Bandwidths, check_assumptions, gamma_band, make_plan
from .quad import GridSpec
from .simulate import (
    MonteCarloResult,
    SimulationConfig,
    TrueModel,
    default_config,
    default_null_model,
    draw_sample,
    run_monte_carlo,
)
from .smoothing import (
    DENSITY_FLOOR,
    DensityEstimate,
    PsiSpec,
    density_estimate,
    nw_directional,
    nw_full,
)
from .survival import CensoredSample, StepSurvival, ipcw_responses, kaplan_meier_censoring
from .teststat import (
    ResidualVector,
    TestReport,
    VarianceEstimates,
    estimate_sigma0_sq,
    plugin_b_v,
    residuals,
    standardize,
    test_statistic,
)

__version__ = "0.1.0"
