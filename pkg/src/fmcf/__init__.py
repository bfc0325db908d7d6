"""Simulator and verification harness for the weighted (f-)mean curvature flow
of closed plane curves: evolves discretized curves, checks the evolution
equations as numerical residuals, and verifies sign-preservation, pinching,
and differential/integral Harnack inequalities with explicit hypothesis
tracking."""

from .curve import (
    DiscreteCurve,
    GeometryStack,
    bean_curve,
    build_geometry,
    circle_curve,
    curve_from_config,
    ellipse_curve,
    intrinsic_distance,
    rounded_square_curve,
    signed_area,
    unit_tangents,
    weighted_laplacian,
)
from .errors import (
    ConfigError,
    ExtinctionError,
    FlowError,
    FmcfError,
    FrameError,
    MeshQualityError,
    OrientationError,
    StepRejectedError,
    TraceError,
)
from .flow import (
    FlowConfig,
    FlowTrace,
    PinchReport,
    SignReport,
    StopRules,
    pinch_monitor,
    redistribute_uniform,
    run,
    sign_monitors,
    step,
)
from .harnack import (
    HarnackReport,
    HarnackSample,
    IntegralHarnackCheck,
    harnack_min,
    harnack_quantity,
    sample_integral_pairs,
    verify_differential_harnack,
    verify_integral_harnack,
)
from .oracles import (
    OrderEstimate,
    RadialSolution,
    circle_radius_estimate,
    convergence_order,
    extinction_time,
    radial_harnack,
    radial_solution,
)
from .residuals import ResidualReport, evolution_residuals, residual_convergence
from .scenarios import (
    CheckResult,
    Scenario,
    bundled_scenarios,
    describe_check,
    load_scenario,
    run_scenario,
)
from .weights import (
    ExploratoryWeight,
    HessianBounds,
    WeightField,
    constant_weight,
    eval_f,
    grad_f,
    hessian_bounds,
    isotropic_weight,
    tangential_hessian,
)

__version__ = "0.1.0"
