"""Shape-constrained least squares under heavy-tailed errors: estimators, envelopes and Monte Carlo audits."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .core import (  # noqa: E402
    PiecewiseLinearFunction,
    SignalSpec,
    SortedSample,
    StepFunction,
    best_m_piece_approximation,
    l2_loss,
    make_sorted_sample,
)
from .isotonic import IsotonicFit, fit_isotonic, minmax_all, minmax_value  # noqa: E402
from .convex import ConvexFit, brute_force_convex, characterization_audit, fit_convex  # noqa: E402
from .noise import ErrorLaw, lp1_norm, sample, survival  # noqa: E402

__all__ = [
    "__version__",
    "PiecewiseLinearFunction",
    "SignalSpec",
    "SortedSample",
    "StepFunction",
    "best_m_piece_approximation",
    "l2_loss",
    "make_sorted_sample",
    "IsotonicFit",
    "fit_isotonic",
    "minmax_all",
    "minmax_value",
    "ConvexFit",
    "brute_force_convex",
    "characterization_audit",
    "fit_convex",
    "ErrorLaw",
    "lp1_norm",
    "sample",
    "survival",
]
