"""Brute-force 1-D oracles on uniform grids.

Everything here is a direct min/max over grid samples, with no closed
forms, so it can be used to certify :mod:`llhomotopy.functions`.
Infinite values are stored as :data:`SENTINEL` to keep the min/max
arithmetic finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envelope import EnvelopeParams

__all__ = [
    "SENTINEL",
    "DEFAULT_LO",
    "DEFAULT_HI",
    "DEFAULT_STEP",
    "Grid1D",
    "grid_moreau",
    "grid_moreau_at",
    "grid_ll",
    "grid_ll_at",
    "grid_proximal_hull",
    "grid_proximal_hull_at",
    "grid_conjugate",
    "finite_diff_grad",
]

SENTINEL = 1e12
DEFAULT_LO = -5.0
DEFAULT_HI = 6.0
DEFAULT_STEP = 1e-3

# cap on the size of one broadcast block (elements)
_BLOCK = 1 << 15


class EmptyGridError(ValueError):
    pass


def _count(lo, hi, step):
    if not step > 0:
        raise ValueError("grid step must be positive")
    return int(math.floor((hi - lo) / step + 1e-9)) + 1


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Samples ``values[i] = f(lo + i * step)``."""

    lo: float
    hi: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("grid needs hi > lo")
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        values = np.asarray(self.values, dtype=float)
        if values.size == 0:
            raise EmptyGridError("grid has no samples")
        n = _count(self.lo, self.hi, self.step)
        if values.shape != (n,):
            raise ValueError(f"expected {n} samples, got shape {values.shape}")
        if np.any(np.isnan(values)) or np.any(values == -np.inf):
            raise ValueError("grid values must be finite or +inf")
        values = np.minimum(values, SENTINEL)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, fn: Callable, lo=DEFAULT_LO, hi=DEFAULT_HI, step=DEFAULT_STEP):
        """Sample a vectorised ``fn`` on the grid."""
        pts = cls.points_for(lo, hi, step)
        return cls(lo, hi, step, np.asarray(fn(pts), dtype=float))

    @classmethod
    def span(cls, lo, hi, step):
        """A grid carrying only its points (values zero), e.g. for slopes."""
        return cls(lo, hi, step, np.zeros(_count(lo, hi, step)))

    @staticmethod
    def points_for(lo, hi, step):
        n = _count(lo, hi, step)
        # rounding makes points such as 0 and 1 exact for decimal steps
        return np.round(lo + step * np.arange(n), 10)

    @property
    def points(self) -> np.ndarray:
        return self.points_for(self.lo, self.hi, self.step)

    def __len__(self):
        return self.values.size

    def index(self, x):
        """Index of the grid point nearest to ``x``."""
        i = np.rint((np.asarray(x, dtype=float) - self.lo) / self.step).astype(int)
        return np.clip(i, 0, len(self) - 1)

    def at(self, x):
        """Value at the grid point nearest to ``x``."""
        return self.values[self.index(x)]

    def with_values(self, values):
        return Grid1D(self.lo, self.hi, self.step, values)


def _points(xs):
    if isinstance(xs, Grid1D):
        return xs.points
    return np.atleast_1d(np.asarray(xs, dtype=float))


def _inf_conv(values, w, xs, scale, return_index=False):
    # out[i] = min_j values[j] + scale * (w[j] - xs[i])^2, in cache-sized blocks
    xs = np.asarray(xs, dtype=float)
    out = np.empty(xs.size)
    idx = np.empty(xs.size, dtype=int) if return_index else None
    # expanded square: values + scale w^2 - 2 scale w x, plus scale x^2 after the min
    base = values + scale * w * w
    rows = max(1, _BLOCK // w.size)
    buf = np.empty((min(rows, xs.size), w.size))
    for start in range(0, xs.size, rows):
        stop = min(start + rows, xs.size)
        b = buf[: stop - start]
        np.multiply.outer(-2.0 * scale * xs[start:stop], w, out=b)
        b += base
        if return_index:
            j = np.argmin(b, axis=1)
            idx[start:stop] = j
            out[start:stop] = b[np.arange(j.size), j]
        else:
            np.min(b, axis=1, out=out[start:stop])
    out += scale * xs * xs
    return (out, idx) if return_index else out


def grid_moreau_at(g: Grid1D, lam, xs, return_index=False):
    """``min_j g[j] + (w_j - x)^2 / (2 lam)`` at arbitrary query points."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    xs = _points(xs)
    scale = 1.0 / (2.0 * lam)
    keep = np.flatnonzero(g.values < SENTINEL)
    if 0 < keep.size < len(g):
        # sentinel samples cannot win while some finite candidate stays below
        # SENTINEL; the full search is the fallback
        out, idx = _inf_conv(g.values[keep], g.points[keep], xs, scale, True)
        if np.all(out < SENTINEL):
            return (out, keep[idx]) if return_index else out
    return _inf_conv(g.values, g.points, xs, scale, return_index)


def grid_moreau(g: Grid1D, lam) -> Grid1D:
    return g.with_values(grid_moreau_at(g, lam, g.points))


def _sup(g, lam, mu, xs, refine, moreau):
    # max over w of moreau_lam(w) - (w - x)^2 / (2 mu); coarse pass on the grid
    if moreau is None:
        moreau = grid_moreau(g, lam)
    neg, idx = _inf_conv(-moreau.values, g.points, xs, 1.0 / (2.0 * mu), True)
    val = -neg
    if refine:
        # local zoom around the grid argmax; moreau evaluated directly off-grid
        rows = np.arange(xs.size)
        w = g.points[idx]
        width = g.step
        offsets = np.linspace(-1.0, 1.0, 9)
        for _ in range(refine):
            cand = w[:, None] + width * offsets[None, :]
            m = grid_moreau_at(g, lam, cand.ravel()).reshape(cand.shape)
            obj = m - (cand - xs[:, None]) ** 2 / (2.0 * mu)
            k = np.argmax(obj, axis=1)
            better = obj[rows, k] > val
            val = np.where(better, obj[rows, k], val)
            w = np.where(better, cand[rows, k], w)
            width /= 4.0
    return val, idx


def grid_ll_at(g: Grid1D, p: EnvelopeParams, xs, refine=0, return_index=False,
               moreau=None):
    """``max_j moreau[j] - (w_j - x)^2 / (2 mu)`` with ``moreau`` on the grid.

    ``refine`` rounds of local zooming (factor 4 each) around the grid
    argmax remove the first-order error that appears when the maximiser
    sits on a kink of the Moreau envelope between grid points.  With
    ``return_index`` the coarse argmax indices are also returned; an
    argmax on the first or last grid point means the supremum was cut off
    by the grid and the value is unreliable.  A precomputed
    ``grid_moreau(g, p.lam)`` may be passed as ``moreau``.
    """
    val, idx = _sup(g, p.lam, p.mu, _points(xs), refine, moreau)
    return (val, idx) if return_index else val


def grid_ll(g: Grid1D, p: EnvelopeParams) -> Grid1D:
    return g.with_values(grid_ll_at(g, p, g.points))


def grid_proximal_hull_at(g: Grid1D, lam, xs, refine=0, return_index=False,
                          moreau=None):
    """Same as :func:`grid_ll_at` with ``mu == lam``."""
    val, idx = _sup(g, lam, lam, _points(xs), refine, moreau)
    return (val, idx) if return_index else val


def grid_proximal_hull(g: Grid1D, lam) -> Grid1D:
    return g.with_values(grid_proximal_hull_at(g, lam, g.points))


def grid_conjugate(g: Grid1D, slopes):
    """Discrete Legendre-Fenchel transform ``max_j s_k w_j - g[j]``.

    ``slopes`` is a :class:`Grid1D` (only its points are used), giving a
    grid result, or an array of slopes, giving an array.
    """
    s = _points(slopes)
    if s.size == 0:
        raise EmptyGridError("no slopes")
    w = g.points
    out = np.empty(s.size)
    rows = max(1, _BLOCK // w.size)
    for start in range(0, s.size, rows):
        sl = slice(start, min(start + rows, s.size))
        out[sl] = np.max(s[sl, None] * w[None, :] - g.values[None, :], axis=1)
    if isinstance(slopes, Grid1D):
        return slopes.with_values(out)
    return out


def finite_diff_grad(fn: Callable[[float], float], x, step=1e-5) -> float:
    """Central difference ``(fn(x + step) - fn(x - step)) / (2 step)``."""
    if not step > 0:
        raise ValueError("step must be positive")
    hi = float(fn(x + step))
    lo = float(fn(x - step))
    if not (math.isfinite(hi) and math.isfinite(lo)):
        raise ValueError(f"non-finite function value near x={x!r}")
    return (hi - lo) / (2.0 * step)
