"""Anomaly detection on time series of distributions."""

from ._distad import (
    BinGrid,
    Detector,
    Error,
    InvalidArgument,
    Model,
    ParseError,
    StateCorrupt,
    UndefinedMetric,
    __version__,
    bin_counts,
    detect_events,
    dirichlet_logpdf,
    dirmult_logpmf,
    exact_log_eta,
    fpr_recall,
    make_quantile_grid,
    make_regular_grid,
    point_score,
    roc_auc,
    simulate,
    window_score,
)

__all__ = [
    "BinGrid",
    "Detector",
    "Error",
    "InvalidArgument",
    "Model",
    "ParseError",
    "StateCorrupt",
    "UndefinedMetric",
    "__version__",
    "bin_counts",
    "detect_events",
    "dirichlet_logpdf",
    "dirmult_logpmf",
    "exact_log_eta",
    "fpr_recall",
    "make_quantile_grid",
    "make_regular_grid",
    "point_score",
    "roc_auc",
    "simulate",
    "window_score",
]
