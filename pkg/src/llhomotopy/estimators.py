"""scikit-learn style wrappers around the composite solvers.

The design matrix ``X`` plays the role of the channel/dictionary ``H`` and
the fitted ``coef_`` is the recovered signal, as for a linear model
without intercept::

    >>> est = LasryLionsRegressor(penalty="binary").fit(H, y)
    >>> bits = (est.coef_ >= 0.5).astype(int)

All hyper-parameters are plain constructor arguments, so the estimators
work with :func:`sklearn.base.clone`, grid searches and pipelines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .functions import parse_function
from .solvers import (
    AdmmConfig,
    CompositeProblem,
    HomotopySchedule,
    solve_admm,
    solve_homotopy,
    solve_ls,
)

__all__ = ["LasryLionsRegressor", "ADMMRegressor", "LeastSquaresRegressor"]


class _CompositeRegressor(RegressorMixin, BaseEstimator):
    def _problem(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        return CompositeProblem(X, y, parse_function(getattr(self, "penalty", "zero")))

    def _start(self, prob):
        init = self.init
        if isinstance(init, str):
            if init == "ls":
                return solve_ls(prob)
            if init == "zero":
                return np.zeros(prob.shape[1])
            raise ValueError(f"init must be 'ls', 'zero' or an array, got {init!r}")
        return prob.check_x(init, name="init")

    def _store(self, res):
        self.coef_ = res.x
        self.n_iter_ = res.outer_iterations
        self.objective_trace_ = res.objective_trace
        self.converged_ = res.converged
        self.result_ = res
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_

    def objective(self, X, y) -> float:
        """``||y - X coef_||^2 + h(coef_)`` on the given data."""
        check_is_fitted(self, "coef_")
        X, y = check_X_y(X, y, y_numeric=True)
        return CompositeProblem(X, y, parse_function(getattr(self, "penalty", "zero"))
                                ).objective(self.coef_)


class LasryLionsRegressor(_CompositeRegressor):
    """Homotopy on Lasry-Lions envelopes of a separable penalty.

    Parameters
    ----------
    penalty : str or SeparableNonsmoothFunction, default="binary"
        Descriptor such as ``"binary"`` or ``"l0:beta=1e-6"``.
    lambda0, mu0 : float
        Initial envelope parameters; ``mu0=None`` means ``0.999 * lambda0``.
    lambda_decay, mu_decay : float
        Per-stage multiplicative factors in (0, 1).
    lambda_floor, max_outer, inner_iters, grad_tol, step_rule, polish
        See :class:`~llhomotopy.solvers.HomotopySchedule`.
    init : {"ls", "zero"} or array, default="ls"
        Starting point.
    """

    def __init__(self, penalty="binary", lambda0=1e5, mu0=None, lambda_decay=0.1,
                 mu_decay=0.1, lambda_floor=1e-8, max_outer=1000, inner_iters=20,
                 grad_tol=0.0, step_rule="lipschitz", polish=False, init="ls"):
        self.penalty = penalty
        self.lambda0 = lambda0
        self.mu0 = mu0
        self.lambda_decay = lambda_decay
        self.mu_decay = mu_decay
        self.lambda_floor = lambda_floor
        self.max_outer = max_outer
        self.inner_iters = inner_iters
        self.grad_tol = grad_tol
        self.step_rule = step_rule
        self.polish = polish
        self.init = init

    def schedule(self) -> HomotopySchedule:
        mu0 = 0.999 * self.lambda0 if self.mu0 is None else self.mu0
        return HomotopySchedule(
            lambda0=self.lambda0, mu0=mu0, lambda_decay=self.lambda_decay,
            mu_decay=self.mu_decay, lambda_floor=self.lambda_floor,
            max_outer=self.max_outer, inner_iters=self.inner_iters,
            grad_tol=self.grad_tol, step_rule=self.step_rule, polish=self.polish,
        )

    def fit(self, X, y):
        prob = self._problem(X, y)
        return self._store(solve_homotopy(prob, self.schedule(), self._start(prob)))


class ADMMRegressor(_CompositeRegressor):
    """ADMM with the proximal map of ``penalty`` in the splitting step."""

    def __init__(self, penalty="binary", rho0=1.0, max_iter=1000, primal_tol=1e-6,
                 dual_tol=1e-6, residual_balance=True, init="ls"):
        self.penalty = penalty
        self.rho0 = rho0
        self.max_iter = max_iter
        self.primal_tol = primal_tol
        self.dual_tol = dual_tol
        self.residual_balance = residual_balance
        self.init = init

    def fit(self, X, y):
        prob = self._problem(X, y)
        cfg = AdmmConfig(rho0=self.rho0, max_iters=self.max_iter,
                         primal_tol=self.primal_tol, dual_tol=self.dual_tol,
                         residual_balance=self.residual_balance)
        return self._store(solve_admm(prob, cfg, self._start(prob)))


class LeastSquaresRegressor(_CompositeRegressor):
    """Minimum-norm least squares, no penalty."""

    def fit(self, X, y):
        prob = self._problem(X, y)
        self.coef_ = solve_ls(prob)
        self.n_iter_ = 1
        return self
