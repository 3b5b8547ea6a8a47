"""Forward (gradient-step) and backward (prox/projection) operators."""

from .backward import (
    BackwardOperator,
    Identity,
    ProjNonneg,
    ProxL1,
    ProxLeastSquares,
    ProxSumSquare,
    proj_nonneg,
    prox_l1,
    prox_sum_square,
)
from .forward import (
    ForwardOperator,
    LogLossForward,
    QuadraticForward,
    SquareLossForward,
    ZeroForward,
    sigmoid,
)
from .nmf import NmfForward
from .portfolio import ProjPortfolio, portfolio_feasible, portfolio_multipliers, proj_portfolio

__all__ = [
    "BackwardOperator",
    "ForwardOperator",
    "Identity",
    "LogLossForward",
    "NmfForward",
    "ProjNonneg",
    "ProjPortfolio",
    "ProxL1",
    "ProxLeastSquares",
    "ProxSumSquare",
    "QuadraticForward",
    "SquareLossForward",
    "ZeroForward",
    "portfolio_feasible",
    "portfolio_multipliers",
    "proj_nonneg",
    "proj_portfolio",
    "prox_l1",
    "prox_sum_square",
    "sigmoid",
]
