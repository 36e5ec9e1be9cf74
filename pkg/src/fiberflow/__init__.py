"""Conformally fibered Kahler geometry: chart algebra, curvature splitting,
reduced collapse flows and their singularity diagnostics."""

__version__ = "0.1.0"

from .chart_geometry import (
    BaseMetric,
    ChartMetricBlocks,
    ChartSampler,
    InverseBlocks,
    RicciBlocks,
    assemble_block_metric,
    calabi_sampler,
    check_base_einstein,
    check_kahler_compatibility,
    check_totally_geodesic,
    fd_ricci_oracle,
    fiber_christoffel,
    flat_sampler,
    fubini_study_base,
    invert_block_metric,
    product_sampler,
    real_metric,
    ricci_blocks,
    riemann_fd,
)
from .calabi_flow import (
    BadProfile,
    CohomologyClass,
    ConfigError,
    DiagnosticsSample,
    FlowError,
    FlowProblem,
    FlowRun,
    FlowState,
    HirzebruchParams,
    MonitorReport,
    MonotonicityLost,
    PastSingularTime,
    ProductParams,
    ProductState,
    RunSettings,
    StepRejected,
    WrongRegime,
    heat_residual_order,
    heat_residual_series,
    hirzebruch_class,
    init_hirzebruch_profile,
    predict_max_time,
    product_class,
    product_closed_form,
    profile_diagnostics,
    run_flow,
    sampler_from_state,
    step_flow,
)
from .oneill_curvature import (
    CurvatureDiagnostics,
    FramePoint,
    a_norm_sq,
    a_tensor,
    curvature_diagnostics,
    frame_point,
    grad_ln_f_norm_sq,
    mixed_curvature_residuals,
    sectional_residual,
    vertical_horizontal_curvature,
)

from .singularity_analyzer import (
    AnalysisError,
    BlowupPick,
    BlowupSequence,
    RescaledPick,
    RescaledSeries,
    SplittingReport,
    TooFewSamples,
    TypeReport,
    WindowOutOfRange,
    analysis_report,
    classify_sup_series,
    classify_type,
    pick_blowup_sequence,
    rescale_series,
    splitting_report,
    synthetic_power_series,
)
from .harness_cli import (
    AnalysisConfig,
    HarnessError,
    ParseError,
    RunConfig,
    ValidationError,
    check_run_dir,
    execute,
    load_config,
    main,
    parse_config,
    run_sweep,
)

__all__ = [
    "AnalysisConfig",
    "AnalysisError",
    "BadProfile",
    "BaseMetric",
    "BlowupPick",
    "BlowupSequence",
    "ChartMetricBlocks",
    "ChartSampler",
    "CohomologyClass",
    "ConfigError",
    "CurvatureDiagnostics",
    "DiagnosticsSample",
    "FlowError",
    "FlowProblem",
    "FlowRun",
    "FlowState",
    "FramePoint",
    "HarnessError",
    "HirzebruchParams",
    "InverseBlocks",
    "MonitorReport",
    "MonotonicityLost",
    "ParseError",
    "PastSingularTime",
    "ProductParams",
    "ProductState",
    "RescaledPick",
    "RescaledSeries",
    "RicciBlocks",
    "RunConfig",
    "RunSettings",
    "SplittingReport",
    "StepRejected",
    "TooFewSamples",
    "TypeReport",
    "ValidationError",
    "WindowOutOfRange",
    "WrongRegime",
    "__version__",
    "a_norm_sq",
    "a_tensor",
    "analysis_report",
    "assemble_block_metric",
    "calabi_sampler",
    "check_base_einstein",
    "check_kahler_compatibility",
    "check_run_dir",
    "check_totally_geodesic",
    "classify_sup_series",
    "classify_type",
    "curvature_diagnostics",
    "execute",
    "fd_ricci_oracle",
    "fiber_christoffel",
    "flat_sampler",
    "frame_point",
    "fubini_study_base",
    "grad_ln_f_norm_sq",
    "heat_residual_order",
    "heat_residual_series",
    "hirzebruch_class",
    "init_hirzebruch_profile",
    "invert_block_metric",
    "load_config",
    "main",
    "mixed_curvature_residuals",
    "parse_config",
    "pick_blowup_sequence",
    "predict_max_time",
    "product_class",
    "product_closed_form",
    "product_sampler",
    "profile_diagnostics",
    "real_metric",
    "rescale_series",
    "ricci_blocks",
    "riemann_fd",
    "run_flow",
    "run_sweep",
    "sampler_from_state",
    "sectional_residual",
    "splitting_report",
    "step_flow",
    "synthetic_power_series",
    "vertical_horizontal_curvature",
]
