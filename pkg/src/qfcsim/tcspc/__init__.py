"""TCSPC analysis: correlation, g2 normalisation, start-stop histograms, fits."""
from .correlate import (
    CorrelationConfig,
    CorrelationHistogram,
    DecayHistogram,
    G2Curve,
    NormalizationError,
    brute_force_counts,
    correlation_counts,
    cross_correlate,
    find_dip,
    g2_zero,
    normalize_g2,
    rebin,
    start_stop_histogram,
)
from .fitting import (
    FitError,
    FitResult,
    fit_biexponential,
    fit_exponential,
    fit_sin2_efficiency,
    fit_sinc2,
    fit_visibility_decay,
    levenberg_marquardt,
)
from .fringes import FringeFit, fringe_scan

__all__ = [
    "CorrelationConfig",
    "CorrelationHistogram",
    "DecayHistogram",
    "FitError",
    "FitResult",
    "FringeFit",
    "G2Curve",
    "NormalizationError",
    "brute_force_counts",
    "correlation_counts",
    "cross_correlate",
    "find_dip",
    "fit_biexponential",
    "fit_exponential",
    "fit_sin2_efficiency",
    "fit_sinc2",
    "fit_visibility_decay",
    "fringe_scan",
    "g2_zero",
    "levenberg_marquardt",
    "normalize_g2",
    "rebin",
    "start_stop_histogram",
]
