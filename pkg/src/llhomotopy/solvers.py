"""Solvers for ``min_x ||y - H x||^2 + h(x)`` with separable ``h``.

Three routes are provided:

* :func:`solve_homotopy` replaces ``h`` by its Lasry-Lions envelope
  ``h^{lam_k, mu_k}`` and runs gradient descent on a sequence of these
  smooth surrogates while both parameters shrink geometrically;
* :func:`solve_admm`, the usual splitting ``x = z`` with the proximal map
  of ``h`` in the ``z`` step (works for nonconvex ``h`` as a heuristic);
* :func:`solve_ls`, unconstrained minimum-norm least squares.

The data term carries no 1/2 factor, so its gradient is ``2 H^T (H x - y)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .envelope import (
    EnvelopeParams,
    SeparableNonsmoothFunction,
    ll_lipschitz_bound,
)
from .functions import ZeroFunction, parse_function

__all__ = [
    "CompositeProblem",
    "HomotopySchedule",
    "AdmmConfig",
    "SolverResult",
    "DivergenceError",
    "solve_homotopy",
    "solve_admm",
    "solve_ls",
    "spectral_norm_sq",
]


STEP_RULES = ("lipschitz", "backtracking")


class DivergenceError(FloatingPointError):
    """An iterate produced a non-finite objective."""


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """``phi(x) = ||y - H x||^2 + h(x)``."""

    H: np.ndarray
    y: np.ndarray
    h: SeparableNonsmoothFunction = field(default_factory=ZeroFunction)

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        y = np.array(self.y, dtype=float)
        if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
            raise ValueError(f"H must be a nonempty 2-D array, got shape {H.shape}")
        if y.ndim != 1 or y.shape[0] != H.shape[0]:
            raise ValueError(f"y must have length {H.shape[0]}, got shape {y.shape}")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(y))):
            raise ValueError("H and y must be finite")
        H.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "h", parse_function(self.h))

    @property
    def shape(self):
        return self.H.shape

    def data_fit(self, x) -> float:
        r = self.y - self.H @ x
        return float(r @ r)

    def objective(self, x) -> float:
        return self.data_fit(x) + self.h(x)

    def check_x(self, x, name="x0"):
        x = np.array(x, dtype=float).ravel()
        if x.shape != (self.H.shape[1],):
            raise ValueError(
                f"{name} must have length {self.H.shape[1]}, got {x.shape[0]}"
            )
        return x


@dataclass(frozen=True)
class HomotopySchedule:
    """Geometric schedule ``lam_k = lambda0 * lambda_decay**k`` (same for mu).

    Stages run while ``lam_k > lambda_floor`` and ``k < max_outer``; each
    stage takes at most ``inner_iters`` gradient steps and ends early when
    the gradient norm drops to ``grad_tol``.

    ``step_rule="lipschitz"`` uses the fixed step ``1 / (2 ||H||^2 + L_k)``.
    ``"backtracking"`` tries twice the previous accepted step and halves it
    until the Armijo condition holds, never going below the Lipschitz step,
    so descent is still guaranteed.  With ``polish`` the returned point is
    ``x - (lam - mu) grad h^{lam, mu}(x)`` at the last stage, the proximal
    point of the last proximal hull, which puts coordinates caught in a
    well of the envelope exactly on the underlying set (e.g. 0 for l0).
    """

    lambda0: float
    mu0: float
    lambda_decay: float = 0.1
    mu_decay: float = 0.1
    lambda_floor: float = 1e-8
    max_outer: int = 1000
    inner_iters: int = 20
    grad_tol: float = 0.0
    step_rule: str = "lipschitz"
    polish: bool = False

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.mu0 > 0 and math.isfinite(self.lambda0)):
            raise ValueError("lambda0 and mu0 must be positive and finite")
        for name in ("lambda_decay", "mu_decay"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
        if not self.lambda_floor > 0:
            raise ValueError("lambda_floor must be positive")
        if int(self.max_outer) < 1 or int(self.inner_iters) < 1:
            raise ValueError("max_outer and inner_iters must be positive")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        object.__setattr__(self, "max_outer", int(self.max_outer))
        object.__setattr__(self, "inner_iters", int(self.inner_iters))
        for k, (lam, mu) in enumerate(self.stages()):
            if not mu < lam:
                raise ValueError(
                    f"schedule reaches mu >= lam at stage {k} (lam={lam!r}, mu={mu!r})"
                )

    @classmethod
    def decoding(cls, **overrides):
        """Decoding defaults: lam=1e5, mu=0.999 lam, both cut by 90% per stage."""
        kw = dict(lambda0=1e5, mu0=0.999e5, lambda_decay=0.1, mu_decay=0.1)
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def unmixing(cls, lambda1=1e3, **overrides):
        """Unmixing defaults: mu = lam/2, cut by 10% and 82% per stage."""
        kw = dict(lambda0=lambda1, mu0=lambda1 / 2.0, lambda_decay=0.9, mu_decay=0.18)
        kw.update(overrides)
        return cls(**kw)

    def stages(self):
        """The ``(lam_k, mu_k)`` pairs that will be run."""
        out = []
        lam, mu = float(self.lambda0), float(self.mu0)
        for _ in range(self.max_outer):
            if lam <= self.lambda_floor:
                break
            out.append((lam, mu))
            lam *= self.lambda_decay
            mu *= self.mu_decay
        return out


@dataclass(frozen=True)
class AdmmConfig:
    """ADMM settings; residual balancing follows the usual 10x / 2x rule."""

    rho0: float = 1.0
    max_iters: int = 1000
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6
    residual_balance: bool = True
    balance_ratio: float = 10.0
    balance_factor: float = 2.0
    rho_min: float = 1e-4
    rho_max: float = 1e4

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be positive")
        if not (self.primal_tol > 0 and self.dual_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (self.balance_ratio > 1 and self.balance_factor > 1):
            raise ValueError("balance_ratio and balance_factor must exceed 1")
        if not 0 < self.rho_min <= self.rho0 <= self.rho_max:
            raise ValueError("need 0 < rho_min <= rho0 <= rho_max")
        object.__setattr__(self, "max_iters", int(self.max_iters))


@dataclass
class SolverResult:
    x: np.ndarray
    objective_trace: np.ndarray
    grad_norm_trace: np.ndarray
    outer_iterations: int
    converged: bool
    wall_time: float
    info: dict = field(default_factory=dict)


def spectral_norm_sq(H, tol=1e-13, max_iter=10_000, seed=0) -> float:
    """``||H||_2^2`` by power iteration on ``H^T H`` from a seeded start."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or not np.any(H):
        raise ValueError("H must be a nonzero matrix")
    v = np.random.default_rng(seed).standard_normal(H.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = H.T @ (H @ v)
        new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # start vector in the null space; restart along a row of H
            v = H[np.argmax(np.abs(H).sum(axis=1))].copy()
            v /= np.linalg.norm(v)
            continue
        v = w / norm
        if abs(new - est) <= tol * new:
            return new
        est = new
    raise RuntimeError(f"power iteration did not converge in {max_iter} iterations")


def solve_ls(prob: CompositeProblem) -> np.ndarray:
    """Minimum-norm least-squares solution (SVD based), ignoring ``h``."""
    x, *_ = linalg.lstsq(prob.H, prob.y, lapack_driver="gelsd")
    return x


def solve_homotopy(
    prob: CompositeProblem,
    sched: HomotopySchedule,
    x0,
    callback: Optional[Callable] = None,
) -> SolverResult:
    """Graduated smoothing with Lasry-Lions envelopes.

    Stage ``k`` runs gradient descent on
    ``F_k(x) = ||y - H x||^2 + h^{lam_k, mu_k}(x)``, warm-started from the
    previous stage, with the step rule of ``sched``.

    ``callback(stage, it, x, value)`` is called after every inner step with
    the current surrogate value; returning True stops the solver.

    Returns
    -------
    SolverResult
        ``objective_trace`` and ``grad_norm_trace`` hold one entry per
        stage (value of ``F_k`` and gradient norm at the stage's end).
        ``info["iterate"]`` is the last gradient iterate, which differs
        from ``x`` only when ``sched.polish`` is set.
    """
    t0 = time.perf_counter()
    H, y, h = prob.H, prob.y, prob.h
    x = prob.check_x(x0)
    lip_data = 2.0 * spectral_norm_sq(H) if np.any(H) else 0.0
    backtrack = sched.step_rule == "backtracking"

    def surrogate(p, x):
        r = H @ x - y
        return float(r @ r) + float(np.sum(h.ll_value_1d(p, x))), r

    objs, gnorms, lams, mus = [], [], [], []
    stopped = False
    n_steps = 0
    p = None
    trial = 0.0
    for k, (lam, mu) in enumerate(sched.stages()):
        p = EnvelopeParams(lam, mu)
        safe = 1.0 / (lip_data + ll_lipschitz_bound(h, p))
        value, r = surrogate(p, x)
        g = 2.0 * (H.T @ r) + h.ll_grad_1d(p, x)
        gnorm = float(np.linalg.norm(g))
        for it in range(sched.inner_iters):
            if gnorm <= sched.grad_tol:
                break
            if backtrack:
                step = max(2.0 * trial, safe)
                while True:
                    x_new = x - step * g
                    v_new, r_new = surrogate(p, x_new)
                    if step <= safe or v_new <= value - 0.5 * step * gnorm**2:
                        break
                    step = max(0.5 * step, safe)
                trial = step
                x, value, r = x_new, v_new, r_new
            else:
                x = x - safe * g
                value, r = surrogate(p, x)
            g = 2.0 * (H.T @ r) + h.ll_grad_1d(p, x)
            gnorm = float(np.linalg.norm(g))
            n_steps += 1
            if callback is not None and callback(k, it, x, value):
                stopped = True
                break
        if not math.isfinite(value):
            raise DivergenceError(f"non-finite objective at stage {k} (lam={lam!r})")
        objs.append(value)
        gnorms.append(gnorm)
        lams.append(lam)
        mus.append(mu)
        if stopped:
            break

    iterate = x
    if sched.polish and p is not None and not stopped:
        x = x - p.nu * h.ll_grad_1d(p, x)
    finished = stopped or len(objs) < sched.max_outer
    return SolverResult(
        x=x,
        objective_trace=np.asarray(objs),
        grad_norm_trace=np.asarray(gnorms),
        outer_iterations=len(objs),
        converged=bool(finished),
        wall_time=time.perf_counter() - t0,
        info={"lam": np.asarray(lams), "mu": np.asarray(mus), "iterate": iterate,
              "inner_steps": n_steps, "stopped_by_callback": stopped},
    )


def solve_admm(
    prob: CompositeProblem,
    cfg: AdmmConfig = AdmmConfig(),
    x0=None,
    callback: Optional[Callable] = None,
) -> SolverResult:
    """ADMM on ``||y - H x||^2 + h(z)`` subject to ``x = z`` (scaled dual).

    The reported point is ``z``, the output of the proximal step, so that
    constraint sets are respected exactly.  ``callback(it, z)`` returning
    True stops the iteration.
    """
    t0 = time.perf_counter()
    H, y, h = prob.H, prob.y, prob.h
    n = H.shape[1]
    x = np.zeros(n) if x0 is None else prob.check_x(x0)
    z = x.copy()
    u = np.zeros(n)
    rho = float(cfg.rho0)
    gram = 2.0 * (H.T @ H)
    hty = 2.0 * (H.T @ y)

    def factor(rho):
        try:
            return linalg.cho_factor(gram + rho * np.eye(n), lower=True)
        except linalg.LinAlgError as exc:
            raise linalg.LinAlgError(f"x-update system not positive definite at rho={rho!r}") from exc

    chol = factor(rho)
    objs, rnorms, snorms, rhos = [], [], [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        x = linalg.cho_solve(chol, hty + rho * (z - u))
        z_old = z
        z = h.prox_1d(1.0 / rho, x + u)
        u = u + x - z
        r = float(np.linalg.norm(x - z))
        s = float(rho * np.linalg.norm(z - z_old))
        value = prob.objective(z)
        objs.append(value)
        rnorms.append(r)
        snorms.append(s)
        rhos.append(rho)
        if callback is not None and callback(it, z):
            converged = True
            break
        if r <= cfg.primal_tol and s <= cfg.dual_tol:
            converged = True
            break
        if cfg.residual_balance:
            scale = 1.0
            if r > cfg.balance_ratio * s:
                scale = cfg.balance_factor
            elif s > cfg.balance_ratio * r:
                scale = 1.0 / cfg.balance_factor
            new_rho = min(max(rho * scale, cfg.rho_min), cfg.rho_max)
            if new_rho != rho:
                # scaled dual u = y / rho must follow rho
                u = u * (rho / new_rho)
                rho = new_rho
                chol = factor(rho)

    return SolverResult(
        x=z,
        objective_trace=np.asarray(objs),
        grad_norm_trace=np.maximum(np.asarray(rnorms), np.asarray(snorms)),
        outer_iterations=it,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        info={
            "x": x,
            "u": u,
            "rho": np.asarray(rhos),
            "primal_residual": np.asarray(rnorms),
            "dual_residual": np.asarray(snorms),
        },
    )
