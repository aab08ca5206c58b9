"""Fast reweighted least squares for analysis-based sparsity reconstruction.

Group sparsity under an orthogonal wavelet basis and total-variation
reconstruction, both accelerated by preconditioned conjugate gradient
with linear-time preconditioners.
"""

from .baseline import (
    DenseProblem,
    GroupPenalty,
    L1Penalty,
    TvPenalty,
    irls_focuss_solve,
    prox_grad_reference_solve,
)
from .exceptions import (
    ConfigError,
    FirlsError,
    NumericalBreakdownError,
    SingularFactorError,
    UndefinedMetricError,
)
from .metrics import SolveReport, mse, relative_error, snr
from .og import OgProblem, firls_og_solve, og_objective
from .operators import (
    DenseOperator,
    FiniteDifferenceOperator,
    GaussianOperator,
    GroupConfig,
    IndexSelectionOperator,
    OrthogonalTransform,
    PartialFourierOperator,
)
from .pcg import PcgConfig, PcgResult, pcg_solve
from .phantom import gen_shepp_logan
from .tv import TvProblem, firls_tv_solve, tv_objective

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DenseOperator",
    "DenseProblem",
    "FiniteDifferenceOperator",
    "FirlsError",
    "GaussianOperator",
    "GroupConfig",
    "GroupPenalty",
    "IndexSelectionOperator",
    "L1Penalty",
    "NumericalBreakdownError",
    "OgProblem",
    "OrthogonalTransform",
    "PartialFourierOperator",
    "PcgConfig",
    "PcgResult",
    "SingularFactorError",
    "SolveReport",
    "TvPenalty",
    "TvProblem",
    "UndefinedMetricError",
    "firls_og_solve",
    "firls_tv_solve",
    "gen_shepp_logan",
    "irls_focuss_solve",
    "mse",
    "og_objective",
    "pcg_solve",
    "prox_grad_reference_solve",
    "relative_error",
    "snr",
    "tv_objective",
]
