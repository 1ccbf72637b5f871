"""Beam damage localization: evidence fusion + inverse FE model updating."""

from .beam import (
    Assembly,
    BeamConfig,
    BoundaryCondition,
    DamageParams,
    DofMap,
    ModalSolution,
    analyze,
    assemble,
    curvature_matrix,
    dK_dtheta,
    eigen_derivatives,
    solve_modes,
)
from .errors import (
    DegenerateSpectrumError,
    InvalidInputError,
    NumericError,
    TotalConflictError,
)
from .features import (
    FeatureKind,
    FeatureVector,
    compute_features,
    curvature_index,
    flexibility_index,
    frequency_index,
    msecr_index,
)
from .fusion import (
    FeatureBpa,
    FusedEvidence,
    IgnoranceComponents,
    IgnoranceWeights,
    build_bpa,
    concentration,
    damage_ranks,
    dempster_combine,
    filter_candidates,
    fuse_features,
    ignorance_components,
    normalize_indices,
    synthesize_alpha,
)
from .measurements import (
    DamageScenario,
    MeasuredModes,
    expand_shapes,
    make_damaged_params,
    synthesize_measurement,
)
from .objective import (
    ObjectiveEvaluation,
    ObjectiveWeights,
    PenaltyForm,
    curvature_error,
    evaluate_objective,
    frequency_shift_error,
    governing_residual_error,
)
from .optimizers import (
    Method,
    OptimizerConfig,
    RunTrace,
    Termination,
    TrustRegionSettings,
    healthy_calibration,
    minimize,
)
from .strategies import (
    ClusterState,
    HierarchicalResult,
    HybridConfig,
    HybridResult,
    StrategyStatus,
    hierarchical_localize,
    hybrid_localize,
    plain_localize,
    reduced_model_update,
)

__version__ = "0.1.0"
