"""Moreau and Lasry-Lions envelopes of separable nonsmooth functions.

For a function ``h`` and ``lam > 0`` the Moreau envelope is

    h^lam(x) = inf_w { h(w) + ||w - x||^2 / (2 lam) }

and for ``lam > mu > 0`` the Lasry-Lions (double) envelope is

    h^{lam,mu}(x) = sup_w { h^lam(w) - ||w - x||^2 / (2 mu) }.

Every function handled here is a sum of identical 1-D terms, so all
envelopes, proximal maps and gradients act coordinatewise.  Concrete
terms live in :mod:`llhomotopy.functions`.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "ParameterError",
    "EnvelopeParams",
    "ProximalHullParams",
    "RegularityInfo",
    "SeparableNonsmoothFunction",
    "moreau_value",
    "ll_value",
    "ll_gradient",
    "proximal_hull_value",
    "ll_lipschitz_bound",
    "curvature_bounds",
]


class ParameterError(ValueError):
    """Envelope parameter outside its admissible range."""


def _positive(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be a finite positive number, got {value!r}")
    return value


@dataclass(frozen=True)
class EnvelopeParams:
    """Smoothing pair ``(lam, mu)`` with ``0 < mu < lam``."""

    lam: float
    mu: float

    def __post_init__(self):
        lam = _positive("lam", self.lam)
        mu = _positive("mu", self.mu)
        if not mu < lam:
            raise ParameterError(f"need mu < lam, got lam={lam!r}, mu={mu!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @property
    def nu(self) -> float:
        """Gap ``lam - mu``, the parameter of the outer Moreau envelope."""
        return self.lam - self.mu

    @property
    def c(self) -> float:
        return self.lam * (self.lam - self.mu) / self.mu


@dataclass(frozen=True)
class ProximalHullParams:
    """The degenerate pair ``mu == lam``; gives the proximal hull."""

    lam: float

    def __post_init__(self):
        object.__setattr__(self, "lam", _positive("lam", self.lam))


@dataclass(frozen=True)
class RegularityInfo:
    """What is known about a function's curvature.

    Attributes
    ----------
    prox_bound : float
        Threshold ``gamma_h``: envelopes are finite for ``lam < gamma_h``.
        ``math.inf`` for functions bounded below.
    sigma : float or None
        Hypoconvexity modulus (``h - sigma/2 ||.||^2`` convex), if known.
    lipschitz : float or None
        Lipschitz constant of the gradient, if ``h`` is smooth.
    """

    prox_bound: float = math.inf
    sigma: Optional[float] = None
    lipschitz: Optional[float] = None

    def __post_init__(self):
        if not self.prox_bound > 0:
            raise ParameterError("prox_bound must be positive")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ParameterError("lipschitz must be nonnegative")
        if (
            self.sigma is not None
            and self.lipschitz is not None
            and self.sigma > self.lipschitz
        ):
            raise ParameterError("need sigma <= lipschitz")


class SeparableNonsmoothFunction(ABC):
    """Sum of a 1-D function applied to every coordinate.

    Subclasses implement the vectorised 1-D surface; every method takes
    and returns arrays of the same shape as ``x``.
    """

    name: str = "abstract"

    @property
    def regularity(self) -> RegularityInfo:
        return RegularityInfo()

    @property
    def descriptor(self) -> str:
        """String accepted by :func:`llhomotopy.functions.parse_function`."""
        return self.name

    @abstractmethod
    def eval_1d(self, x):
        ...

    @abstractmethod
    def prox_1d(self, gamma, x):
        """A minimiser of ``h(w) + (w - x)^2 / (2 gamma)``."""

    @abstractmethod
    def moreau_1d(self, gamma, x):
        ...

    @abstractmethod
    def ll_value_1d(self, params: EnvelopeParams, x):
        ...

    @abstractmethod
    def ll_grad_1d(self, params: EnvelopeParams, x):
        ...

    @abstractmethod
    def hull_1d(self, lam, x):
        """The proximal hull ``h^{lam,lam}``."""

    def __call__(self, x) -> float:
        return float(np.sum(self.eval_1d(np.asarray(x, dtype=float))))

    def prox(self, gamma, x):
        return self.prox_1d(gamma, np.asarray(x, dtype=float))


def _as_vector(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return x


def _check_lam(f, lam):
    lam = _positive("lam", lam)
    if lam >= f.regularity.prox_bound:
        raise ParameterError(
            f"lam={lam!r} must be below the prox bound {f.regularity.prox_bound!r}"
        )
    return lam


def _check_params(f, p):
    if not isinstance(p, EnvelopeParams):
        raise ParameterError(f"expected EnvelopeParams, got {type(p).__name__}")
    _check_lam(f, p.lam)
    return p


def moreau_value(f: SeparableNonsmoothFunction, lam: float, x) -> float:
    """Moreau envelope ``h^lam(x)`` summed over coordinates."""
    lam = _check_lam(f, lam)
    return float(np.sum(f.moreau_1d(lam, _as_vector(x))))


def ll_value(f: SeparableNonsmoothFunction, p: EnvelopeParams, x) -> float:
    """Lasry-Lions envelope ``h^{lam,mu}(x)``."""
    p = _check_params(f, p)
    return float(np.sum(f.ll_value_1d(p, _as_vector(x))))


def ll_gradient(f: SeparableNonsmoothFunction, p: EnvelopeParams, x) -> np.ndarray:
    """Gradient of the Lasry-Lions envelope.

    Equal to ``(w* - x) / mu`` with ``w*`` the maximiser in the defining
    supremum.
    """
    p = _check_params(f, p)
    return np.asarray(f.ll_grad_1d(p, _as_vector(x)), dtype=float)


def proximal_hull_value(f: SeparableNonsmoothFunction, p, x) -> float:
    """Proximal hull ``h^{lam,lam}(x)``; may be ``inf`` off ``conv dom h``."""
    lam = p.lam if isinstance(p, ProximalHullParams) else p
    lam = _check_lam(f, lam)
    return float(np.sum(f.hull_1d(lam, _as_vector(x))))


def _tight_sigma(sigma, nu):
    # lower curvature of h^{lam,mu} for sigma-hypoconvex h; needs 1 + nu*sigma > 0
    denom = 1.0 + nu * sigma
    if denom <= 0:
        return None
    return sigma / denom


def ll_lipschitz_bound(f: SeparableNonsmoothFunction, p: EnvelopeParams) -> float:
    """Smallest justified Lipschitz constant of ``grad h^{lam,mu}``."""
    p = _check_params(f, p)
    reg = f.regularity
    nu = p.nu
    bounds = [max(1.0 / p.mu, 1.0 / nu)]
    if reg.sigma is not None:
        lo = _tight_sigma(reg.sigma, nu)
        if lo is not None:
            bounds.append(max(abs(lo), 1.0 / nu))
    if reg.lipschitz is not None:
        bounds.append(reg.lipschitz / (1.0 + nu * reg.lipschitz))
    return min(bounds)


def curvature_bounds(
    f: SeparableNonsmoothFunction, p: EnvelopeParams
) -> Tuple[float, float]:
    """Bounds ``(lower, upper)`` on the curvature of ``h^{lam,mu}``.

    ``lower * ||x-y||^2 <= <grad(x) - grad(y), x - y> <= upper * ||x-y||^2``.
    """
    lip = ll_lipschitz_bound(f, p)
    reg = f.regularity
    nu = p.nu
    lower = [-1.0 / p.mu, -lip]
    upper = [1.0 / nu, lip]
    if reg.sigma is not None:
        lo = _tight_sigma(reg.sigma, nu)
        if lo is not None:
            lower.append(lo)
    if reg.lipschitz is not None:
        upper.append(reg.lipschitz / (1.0 + nu * reg.lipschitz))
    return max(lower), min(upper)
