"""Multiplicative dynamic mode decomposition.

Koopman operator approximation on Voronoi indicator dictionaries whose
matrix has at most one 1 per row, so that the approximation respects
``K(fg) = (Kf)(Kg)``.  The package also provides indicator EDMD and exact
DMD as baselines, functional-graph spectra, residuals, spectral-measure
moments and POD compression for field data.
"""

from .dictionary import (
    Dictionary,
    VoronoiDictionary,
    arc_dictionary,
    assign,
    distortion,
    distortion_curve,
    fit_kmeans,
    indicator_matrix,
)
from .dynsys import (
    SnapshotSet,
    SystemConfig,
    add_field_noise,
    add_noise,
    simulate,
    simulate_lorenz,
    simulate_pendulum,
    simulate_rotation,
    traveling_wave,
)
from .estimators import (
    ExactDMD,
    IndicatorEDMD,
    KoopmanApprox,
    MultDMD,
    TransitionWeights,
    accumulate,
    fit_edmd_indicator,
    fit_exact_dmd,
    fit_multdmd,
    objective,
)
from .exceptions import (
    CellMergeWarning,
    ConditioningWarning,
    ConfigError,
    DegenerateDataError,
    DomainError,
    InfeasibleError,
    IntegrationDivergedError,
    MultDMDError,
    ParseError,
    SingularGramError,
    SpectralError,
    UndefinedResidualError,
    UnsupportedSamplingError,
)
from .io import load_snapshots, save_snapshots
from .pod import POD, PODBasis, fit_pod, koopman_modes, project, reconstruct
from .spectral import (
    SpectralResult,
    autocorrelation,
    cycle_spectrum,
    dense_eig,
    model_moments,
    residual,
    with_residuals,
)

__version__ = "0.1.0"

__all__ = [
    "POD",
    "CellMergeWarning",
    "ConditioningWarning",
    "ConfigError",
    "DegenerateDataError",
    "Dictionary",
    "DomainError",
    "ExactDMD",
    "IndicatorEDMD",
    "InfeasibleError",
    "IntegrationDivergedError",
    "KoopmanApprox",
    "MultDMD",
    "MultDMDError",
    "PODBasis",
    "ParseError",
    "SingularGramError",
    "SnapshotSet",
    "SpectralError",
    "SpectralResult",
    "SystemConfig",
    "TransitionWeights",
    "UndefinedResidualError",
    "UnsupportedSamplingError",
    "VoronoiDictionary",
    "accumulate",
    "add_field_noise",
    "add_noise",
    "arc_dictionary",
    "assign",
    "autocorrelation",
    "cycle_spectrum",
    "dense_eig",
    "distortion",
    "distortion_curve",
    "fit_edmd_indicator",
    "fit_exact_dmd",
    "fit_kmeans",
    "fit_multdmd",
    "fit_pod",
    "indicator_matrix",
    "koopman_modes",
    "load_snapshots",
    "model_moments",
    "objective",
    "project",
    "reconstruct",
    "residual",
    "save_snapshots",
    "simulate",
    "simulate_lorenz",
    "simulate_pendulum",
    "simulate_rotation",
    "traveling_wave",
    "with_residuals",
]
