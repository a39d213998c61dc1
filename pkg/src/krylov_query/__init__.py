"""krylov-query - state-aware query complexity of matrix functions via Lanczos and Favard."""

__version__ = "0.1.0"

from .core.duality import (  # noqa: E402
    QueryReport,
    degree_functional,
    hhl_analysis,
    least_squares_oracle,
    run_duality_scenario,
    solve_duality,
    worst_case_degree,
)
from .core.favard import TargetFunction, expand, truncate  # noqa: E402
from .core.lanczos import KrylovDecomposition, lanczos_decompose  # noqa: E402
from .core.measure import DiscreteMeasure, measure_from_decomposition  # noqa: E402

__all__ = [
    "__version__",
    "DiscreteMeasure",
    "KrylovDecomposition",
    "QueryReport",
    "TargetFunction",
    "degree_functional",
    "expand",
    "hhl_analysis",
    "lanczos_decompose",
    "least_squares_oracle",
    "measure_from_decomposition",
    "run_duality_scenario",
    "solve_duality",
    "truncate",
    "worst_case_degree",
]
