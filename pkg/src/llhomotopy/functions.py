"""Separable nonsmooth terms with closed-form envelopes.

Closed forms below write ``nu = lam - mu``.

Binary indicator of ``{0, 1}``.  With ``d`` the distance to the nearer
of ``0`` and ``1`` and ``s = |x - 1/2|``::

    h^{lam,mu}(x) = d^2 / (2 nu)                    if d <= nu / (2 lam)
                  = 1/(8 lam) - s^2 / (2 mu)        otherwise
    h^{lam,lam}(x) = x (1 - x) / (2 lam)            on [0, 1], inf outside

Scaled l0, ``beta * [x != 0]``.  With ``t = sqrt(2 lam beta)``::

    h^{lam,mu}(x) = x^2 / (2 nu)                    if |x| <= t nu / lam
                  = beta - (|x| - t)^2 / (2 mu)     if t nu / lam < |x| < t
                  = beta                            if |x| >= t
    h^{lam,lam}(x) = (t/lam)|x| - x^2 / (2 lam)    if |x| <= t, beta otherwise

Both pieces are continuously differentiable across the breakpoints.  For
the convex terms (box, l1, zero) the proximal hull is the function itself,
hence ``h^{lam,mu} = h^{lam - mu}``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .envelope import (
    EnvelopeParams,
    ParameterError,
    RegularityInfo,
    SeparableNonsmoothFunction,
)

__all__ = [
    "BinaryIndicator",
    "ScaledL0",
    "BoxIndicator",
    "L1Norm",
    "ZeroFunction",
    "binary_prox_1d",
    "l0_prox_1d",
    "binary_ll_value_1d",
    "binary_ll_grad_1d",
    "l0_ll_value_1d",
    "l0_ll_grad_1d",
    "box_ll_value_1d",
    "box_ll_grad_1d",
    "l1_ll_value_1d",
    "l1_ll_grad_1d",
    "zero_ll_value_1d",
    "zero_ll_grad_1d",
    "parse_function",
    "DESCRIPTORS",
]

DESCRIPTORS = ("binary", "l0:beta=<v>", "box:<lo>,<hi>", "l1:beta=<v>", "zero")


def _arr(x):
    return np.asarray(x, dtype=float)


def _check(p):
    if not isinstance(p, EnvelopeParams):
        raise ParameterError(f"expected EnvelopeParams, got {type(p).__name__}")
    return p


# -- binary indicator of {0, 1} ----------------------------------------------


def binary_prox_1d(gamma, x):
    """Projection onto ``{0, 1}``; ``x == 0.5`` goes to 1."""
    return np.where(_arr(x) >= 0.5, 1.0, 0.0)


def binary_ll_value_1d(p: EnvelopeParams, x):
    p = _check(p)
    x = _arr(x)
    s = np.abs(x - 0.5)
    d = np.abs(s - 0.5)
    outer = (s >= 0.5) | (d <= p.nu / (2.0 * p.lam))
    return np.where(
        outer, d * d / (2.0 * p.nu), 1.0 / (8.0 * p.lam) - s * s / (2.0 * p.mu)
    )


def binary_ll_grad_1d(p: EnvelopeParams, x):
    p = _check(p)
    x = _arr(x)
    s = np.abs(x - 0.5)
    d = np.abs(s - 0.5)
    outer = (s >= 0.5) | (d <= p.nu / (2.0 * p.lam))
    nearest = np.where(x >= 0.5, 1.0, 0.0)
    return np.where(outer, (x - nearest) / p.nu, -(x - 0.5) / p.mu)


@dataclass(frozen=True)
class BinaryIndicator(SeparableNonsmoothFunction):
    """Indicator of ``{0, 1}`` in every coordinate."""

    name = "binary"

    def eval_1d(self, x):
        x = _arr(x)
        return np.where((x == 0.0) | (x == 1.0), 0.0, math.inf)

    def prox_1d(self, gamma, x):
        return binary_prox_1d(gamma, x)

    def moreau_1d(self, gamma, x):
        x = _arr(x)
        return np.minimum(x * x, (x - 1.0) ** 2) / (2.0 * gamma)

    def ll_value_1d(self, params, x):
        return binary_ll_value_1d(params, x)

    def ll_grad_1d(self, params, x):
        return binary_ll_grad_1d(params, x)

    def hull_1d(self, lam, x):
        x = _arr(x)
        inside = (x >= 0.0) & (x <= 1.0)
        with np.errstate(invalid="ignore"):
            return np.where(inside, x * (1.0 - x) / (2.0 * lam), math.inf)


# -- scaled l0 ----------------------------------------------------------------


def l0_prox_1d(gamma, beta, x):
    """Hard thresholding at ``sqrt(2 gamma beta)``; ties go to zero."""
    x = _arr(x)
    return np.where(x * x > 2.0 * gamma * beta, x, 0.0)


def _l0_pieces(p, beta):
    t = math.sqrt(2.0 * p.lam * beta)
    return t, t * p.nu / p.lam


def l0_ll_value_1d(p: EnvelopeParams, beta, x):
    p = _check(p)
    x = np.abs(_arr(x))
    t, core = _l0_pieces(p, beta)
    return np.where(
        x <= core,
        x * x / (2.0 * p.nu),
        np.where(x >= t, beta, beta - (x - t) ** 2 / (2.0 * p.mu)),
    )


def l0_ll_grad_1d(p: EnvelopeParams, beta, x):
    p = _check(p)
    x = _arr(x)
    a = np.abs(x)
    t, core = _l0_pieces(p, beta)
    return np.where(
        a <= core,
        x / p.nu,
        np.where(a >= t, 0.0, -np.sign(x) * (a - t) / p.mu),
    )


@dataclass(frozen=True)
class ScaledL0(SeparableNonsmoothFunction):
    """``beta`` times the number of nonzero coordinates."""

    beta: float = 1.0
    name = "l0"

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ParameterError("beta must be finite and nonnegative")
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def descriptor(self):
        return f"l0:beta={self.beta!r}"

    def eval_1d(self, x):
        return np.where(_arr(x) != 0.0, self.beta, 0.0)

    def prox_1d(self, gamma, x):
        return l0_prox_1d(gamma, self.beta, x)

    def moreau_1d(self, gamma, x):
        x = _arr(x)
        return np.minimum(x * x / (2.0 * gamma), self.beta)

    def ll_value_1d(self, params, x):
        return l0_ll_value_1d(params, self.beta, x)

    def ll_grad_1d(self, params, x):
        return l0_ll_grad_1d(params, self.beta, x)

    def hull_1d(self, lam, x):
        a = np.abs(_arr(x))
        t = math.sqrt(2.0 * lam * self.beta)
        return np.where(a <= t, (t / lam) * a - a * a / (2.0 * lam), self.beta)


# -- convex terms -------------------------------------------------------------


def box_ll_value_1d(p: EnvelopeParams, x, lo=0.0, hi=1.0):
    p = _check(p)
    x = _arr(x)
    return (x - np.clip(x, lo, hi)) ** 2 / (2.0 * p.nu)


def box_ll_grad_1d(p: EnvelopeParams, x, lo=0.0, hi=1.0):
    p = _check(p)
    x = _arr(x)
    return (x - np.clip(x, lo, hi)) / p.nu


@dataclass(frozen=True)
class BoxIndicator(SeparableNonsmoothFunction):
    """Indicator of ``[lo, hi]`` in every coordinate."""

    lo: float = 0.0
    hi: float = 1.0
    name = "box"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ParameterError("box needs lo < hi")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @property
    def regularity(self):
        return RegularityInfo(sigma=0.0)

    @property
    def descriptor(self):
        return f"box:{self.lo!r},{self.hi!r}"

    def eval_1d(self, x):
        x = _arr(x)
        return np.where((x >= self.lo) & (x <= self.hi), 0.0, math.inf)

    def prox_1d(self, gamma, x):
        return np.clip(_arr(x), self.lo, self.hi)

    def moreau_1d(self, gamma, x):
        x = _arr(x)
        return (x - np.clip(x, self.lo, self.hi)) ** 2 / (2.0 * gamma)

    def ll_value_1d(self, params, x):
        return box_ll_value_1d(params, x, self.lo, self.hi)

    def ll_grad_1d(self, params, x):
        return box_ll_grad_1d(params, x, self.lo, self.hi)

    def hull_1d(self, lam, x):
        return self.eval_1d(x)


def _huber(gamma, beta, x):
    a = np.abs(x)
    return np.where(
        a <= gamma * beta, x * x / (2.0 * gamma), beta * a - gamma * beta * beta / 2.0
    )


def l1_ll_value_1d(p: EnvelopeParams, beta, x):
    p = _check(p)
    return _huber(p.nu, beta, _arr(x))


def l1_ll_grad_1d(p: EnvelopeParams, beta, x):
    p = _check(p)
    return np.clip(_arr(x) / p.nu, -beta, beta)


@dataclass(frozen=True)
class L1Norm(SeparableNonsmoothFunction):
    """``beta * sum |x_i|``."""

    beta: float = 1.0
    name = "l1"

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ParameterError("beta must be finite and nonnegative")
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def regularity(self):
        return RegularityInfo(sigma=0.0)

    @property
    def descriptor(self):
        return f"l1:beta={self.beta!r}"

    def eval_1d(self, x):
        return self.beta * np.abs(_arr(x))

    def prox_1d(self, gamma, x):
        x = _arr(x)
        return np.sign(x) * np.maximum(np.abs(x) - gamma * self.beta, 0.0)

    def moreau_1d(self, gamma, x):
        return _huber(gamma, self.beta, _arr(x))

    def ll_value_1d(self, params, x):
        return l1_ll_value_1d(params, self.beta, x)

    def ll_grad_1d(self, params, x):
        return l1_ll_grad_1d(params, self.beta, x)

    def hull_1d(self, lam, x):
        return self.eval_1d(x)


def zero_ll_value_1d(p: EnvelopeParams, x):
    _check(p)
    return np.zeros_like(_arr(x))


def zero_ll_grad_1d(p: EnvelopeParams, x):
    _check(p)
    return np.zeros_like(_arr(x))


@dataclass(frozen=True)
class ZeroFunction(SeparableNonsmoothFunction):
    name = "zero"

    @property
    def regularity(self):
        return RegularityInfo(sigma=0.0, lipschitz=0.0)

    def eval_1d(self, x):
        return np.zeros_like(_arr(x))

    def prox_1d(self, gamma, x):
        return _arr(x).copy()

    def moreau_1d(self, gamma, x):
        return np.zeros_like(_arr(x))

    def ll_value_1d(self, params, x):
        return zero_ll_value_1d(params, x)

    def ll_grad_1d(self, params, x):
        return zero_ll_grad_1d(params, x)

    def hull_1d(self, lam, x):
        return np.zeros_like(_arr(x))


_BETA = re.compile(r"^beta\s*=\s*(.+)$")


def parse_function(descriptor) -> SeparableNonsmoothFunction:
    """Build a function from a descriptor such as ``"l0:beta=1e-6"``.

    Accepted forms: ``binary``, ``l0:beta=<v>``, ``box:<lo>,<hi>``,
    ``l1:beta=<v>``, ``zero``.  Existing function objects pass through.
    """
    if isinstance(descriptor, SeparableNonsmoothFunction):
        return descriptor
    text = str(descriptor).strip()
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "binary" and not arg:
            return BinaryIndicator()
        if kind == "zero" and not arg:
            return ZeroFunction()
        if kind == "box":
            if not arg:
                return BoxIndicator()
            lo, hi = (float(v) for v in arg.split(","))
            return BoxIndicator(lo, hi)
        if kind in ("l0", "l1"):
            beta = 1.0
            if arg:
                m = _BETA.match(arg.strip())
                if m is None:
                    raise ValueError(arg)
                beta = float(m.group(1))
            return ScaledL0(beta) if kind == "l0" else L1Norm(beta)
    except (ValueError, ParameterError) as exc:
        raise ValueError(
            f"invalid function descriptor {text!r} ({exc}); "
            f"valid forms: {', '.join(DESCRIPTORS)}"
        ) from None
    raise ValueError(
        f"unknown function descriptor {text!r}; valid forms: {', '.join(DESCRIPTORS)}"
    )
