"""Lasry-Lions envelopes of separable nonsmooth functions and a homotopy
solver for ``min_x ||y - H x||^2 + h(x)``."""

from .envelope import (
    EnvelopeParams,
    ParameterError,
    ProximalHullParams,
    RegularityInfo,
    SeparableNonsmoothFunction,
    curvature_bounds,
    ll_gradient,
    ll_lipschitz_bound,
    ll_value,
    moreau_value,
    proximal_hull_value,
)
from .estimators import ADMMRegressor, LasryLionsRegressor, LeastSquaresRegressor
from .functions import (
    BinaryIndicator,
    BoxIndicator,
    L1Norm,
    ScaledL0,
    ZeroFunction,
    parse_function,
)
from .solvers import (
    AdmmConfig,
    CompositeProblem,
    DivergenceError,
    HomotopySchedule,
    SolverResult,
    solve_admm,
    solve_homotopy,
    solve_ls,
)

__version__ = "0.1.0"

__all__ = [
    "EnvelopeParams",
    "ProximalHullParams",
    "RegularityInfo",
    "SeparableNonsmoothFunction",
    "ParameterError",
    "moreau_value",
    "ll_value",
    "ll_gradient",
    "proximal_hull_value",
    "ll_lipschitz_bound",
    "curvature_bounds",
    "BinaryIndicator",
    "ScaledL0",
    "BoxIndicator",
    "L1Norm",
    "ZeroFunction",
    "parse_function",
    "CompositeProblem",
    "HomotopySchedule",
    "AdmmConfig",
    "SolverResult",
    "DivergenceError",
    "solve_homotopy",
    "solve_admm",
    "solve_ls",
    "LasryLionsRegressor",
    "ADMMRegressor",
    "LeastSquaresRegressor",
]
