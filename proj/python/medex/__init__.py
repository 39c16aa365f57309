"""Sequential exploration of expensive deterministic systems.

The heavy lifting lives in the compiled extension; this package re-exports
the user-facing pieces. Configuration objects are plain dicts (or JSON
strings) matching the CLI config schema.
"""

from ._medex import (
    Classifier,
    GpModel,
    Surrogate,
    __version__,
    compare_designs,
    ei_optimize,
    evaluate,
    expected_improvement,
    fit_forest,
    fit_gp,
    fit_logistic,
    fit_loss_surrogate,
    loss,
    make_design,
    med_generate,
    run_exploration,
    table_from_csv,
)

__all__ = [
    "Classifier",
    "GpModel",
    "Surrogate",
    "__version__",
    "compare_designs",
    "ei_optimize",
    "evaluate",
    "expected_improvement",
    "fit_forest",
    "fit_gp",
    "fit_logistic",
    "fit_loss_surrogate",
    "loss",
    "make_design",
    "med_generate",
    "run_exploration",
    "table_from_csv",
]
