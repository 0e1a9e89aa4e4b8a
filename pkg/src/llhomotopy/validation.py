"""Numerical certification of the closed-form envelopes.

Each ``check_*`` function compares a closed form, or an identity between
envelopes, against the brute-force grid oracles and returns a list of
:class:`CheckResult` rows (largest deviation against a tolerance).
:func:`run_checks` runs a whole suite; the ``validate`` CLI command and
the acceptance tests are thin wrappers around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .envelope import (
    EnvelopeParams,
    SeparableNonsmoothFunction,
    curvature_bounds,
    ll_lipschitz_bound,
    ll_value,
)
from .functions import BinaryIndicator, BoxIndicator, L1Norm, ScaledL0, ZeroFunction
from .oracle import (
    DEFAULT_HI,
    DEFAULT_LO,
    DEFAULT_STEP,
    Grid1D,
    finite_diff_grad,
    grid_conjugate,
    grid_ll_at,
    grid_moreau,
    grid_moreau_at,
    grid_proximal_hull,
    grid_proximal_hull_at,
)

__all__ = [
    "CheckResult",
    "FUNCTIONS",
    "CHAIN_PAIRS",
    "SUITES",
    "PerturbedFunction",
    "check_ordering_chain",
    "check_oracle_chain",
    "check_oracle_grid",
    "check_gradients",
    "check_lipschitz",
    "check_monotonicity",
    "check_inf_preservation",
    "check_symmetry",
    "check_convexity",
    "check_separability",
    "check_prox",
    "check_composition_identity",
    "check_conjugate_identities",
    "run_checks",
    "results_csv",
]

# the parameter values below put the kinks of the conjugates on the slope grid
FUNCTIONS: Dict[str, SeparableNonsmoothFunction] = {
    "binary": BinaryIndicator(),
    "l0": ScaledL0(0.5),
    "box": BoxIndicator(0.0, 1.0),
    "l1": L1Norm(1.0),
    "zero": ZeroFunction(),
}
CHAIN_PAIRS = tuple((lam, f * lam) for lam in (0.1, 1.0, 10.0) for f in (0.1, 0.5, 0.9))

CHAIN_TOL = 1e-10
ORACLE_TOL = 1e-4
GRAD_REL_TOL = 1e-5
ORACLE_GRAD_TOL = 1e-3
COMPOSITION_TOL = 1e-3
CONJUGATE_TOL = 2e-3
INF_TOL = 1e-6
LIP_SLACK = 1e-8

SLOPE_LO, SLOPE_HI, SLOPE_STEP = -20.0, 20.0, 1e-2
REFINE = 3


@dataclass(frozen=True)
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.deviation) and self.deviation <= self.tolerance


class PerturbedFunction(SeparableNonsmoothFunction):
    """``base`` with its closed-form envelope value shifted by ``delta``.

    Only used to show that the checks catch a wrong closed form.
    """

    def __init__(self, base: SeparableNonsmoothFunction, delta: float = 1e-3):
        self.base = base
        self.delta = float(delta)
        self.name = base.name

    @property
    def regularity(self):
        return self.base.regularity

    @property
    def descriptor(self):
        return self.base.descriptor

    def eval_1d(self, x):
        return self.base.eval_1d(x)

    def prox_1d(self, gamma, x):
        return self.base.prox_1d(gamma, x)

    def moreau_1d(self, gamma, x):
        return self.base.moreau_1d(gamma, x)

    def ll_value_1d(self, params, x):
        return self.base.ll_value_1d(params, x) + self.delta

    def ll_grad_1d(self, params, x):
        return self.base.ll_grad_1d(params, x)

    def hull_1d(self, lam, x):
        return self.base.hull_1d(lam, x)


def _max(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(a)) if a.size else 0.0


def _excess(lo, hi):
    # largest amount by which lo exceeds hi; inf - inf counts as no excess
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = np.where(np.isinf(hi) & (hi > 0), -np.inf, lo - hi)
    return max(0.0, _max(d))


def _abs_dev(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    return _max(np.where(both_inf, 0.0, np.abs(a - b)))


def _grid(fn, lo=DEFAULT_LO, hi=DEFAULT_HI, step=DEFAULT_STEP) -> Grid1D:
    return Grid1D.sample(fn.eval_1d, lo, hi, step)


def _grid_sample(rng, g: Grid1D, n):
    return g.points[rng.choice(len(g), size=n, replace=False)]


def _interior(g: Grid1D, frac=0.8):
    pts = g.points
    pad = 0.5 * (1.0 - frac) * (g.hi - g.lo)
    return (pts >= g.lo + pad) & (pts <= g.hi - pad)


def _name(check, fname, extra=""):
    return f"{check}[{fname}{extra}]"


def check_ordering_chain(fn, fname, rng, n=1000, pairs=CHAIN_PAIRS) -> List[CheckResult]:
    """Closed forms: ``h^lam <= h^{lam,mu} <= h^{lam-mu} <= h``."""
    x = rng.uniform(DEFAULT_LO, DEFAULT_HI, n)
    dev = 0.0
    for lam, mu in pairs:
        p = EnvelopeParams(lam, mu)
        m_lam = fn.moreau_1d(lam, x)
        ll = fn.ll_value_1d(p, x)
        m_nu = fn.moreau_1d(p.nu, x)
        h = fn.eval_1d(x)
        dev = max(dev, _excess(m_lam, ll), _excess(ll, m_nu), _excess(m_nu, h))
    return [CheckResult(_name("chain/closed", fname), dev, CHAIN_TOL)]


def check_oracle_chain(fn, fname, rng, n=1000, pairs=CHAIN_PAIRS, n_compare=60,
                       grid=None) -> List[CheckResult]:
    """Grid-oracle chain on ``n`` grid points and closed forms vs oracle.

    The oracle chain holds exactly on grid points; the closed-form values
    of the Moreau envelope, LL envelope and proximal hull are compared
    with the (refined) oracle on a subsample of ``n_compare`` of them,
    skipping points where the oracle supremum is cut off by the grid.
    """
    g = _grid(fn) if grid is None else grid
    x = _grid_sample(rng, g, n)
    sub = x[:n_compare]
    chain = agree = 0.0
    moreau_cache = {}
    for lam, mu in pairs:
        p = EnvelopeParams(lam, mu)
        if lam not in moreau_cache:
            moreau_cache[lam] = grid_moreau(g, lam)
        m = moreau_cache[lam]
        m_lam = m.at(x)
        ll = grid_ll_at(g, p, x, moreau=m)
        m_nu = grid_moreau_at(g, p.nu, x)
        h = g.at(x)
        chain = max(chain, _excess(m_lam, ll), _excess(ll, m_nu), _excess(m_nu, h))

        ll_o, idx = grid_ll_at(g, p, sub, refine=REFINE, return_index=True, moreau=m)
        ok = (idx > 0) & (idx < len(g) - 1)
        agree = max(agree, _abs_dev(fn.ll_value_1d(p, sub[ok]), ll_o[ok]))
        agree = max(agree, _abs_dev(fn.moreau_1d(lam, sub), m.at(sub)))
        hull_o, idx = grid_proximal_hull_at(g, lam, sub, refine=REFINE, return_index=True,
                                            moreau=m)
        ok = (idx > 0) & (idx < len(g) - 1)
        agree = max(agree, _abs_dev(fn.hull_1d(lam, sub[ok]), hull_o[ok]))
    return [
        CheckResult(_name("chain/oracle", fname), chain, ORACLE_TOL),
        CheckResult(_name("oracle/closed-form", fname), agree, ORACLE_TOL),
    ]


def check_oracle_grid(fn, fname, lam=1.0, mu=0.5, n_points=2201, fd_step=1e-4,
                      grid=None) -> List[CheckResult]:
    """Closed-form value and gradient vs the oracle on an evenly spaced grid.

    Gradients are compared with central differences of the refined
    oracle.  Points whose oracle supremum is cut off by the grid, or
    whose difference stencil straddles a breakpoint of the closed-form
    gradient, are left out.
    """
    g = _grid(fn) if grid is None else grid
    p = EnvelopeParams(lam, mu)
    m = grid_moreau(g, lam)
    x = np.round(np.linspace(DEFAULT_LO, DEFAULT_HI, n_points), 10)
    val, idx = grid_ll_at(g, p, x, refine=REFINE, return_index=True, moreau=m)
    ok = (idx > 0) & (idx < len(g) - 1)
    vdev = _abs_dev(fn.ll_value_1d(p, x[ok]), val[ok])

    up, iu = grid_ll_at(g, p, x + fd_step, refine=REFINE, return_index=True, moreau=m)
    dn, idn = grid_ll_at(g, p, x - fd_step, refine=REFINE, return_index=True, moreau=m)
    fd = (up - dn) / (2.0 * fd_step)
    gr = fn.ll_grad_1d(p, x)
    # second differences of the closed-form gradient vanish away from breakpoints
    curv_l = (gr - fn.ll_grad_1d(p, x - fd_step)) / fd_step
    curv_r = (fn.ll_grad_1d(p, x + fd_step) - gr) / fd_step
    smooth = np.abs(curv_l - curv_r) <= 1e-6 * (1.0 + np.abs(curv_l))
    ok = ok & smooth & (iu > 0) & (iu < len(g) - 1) & (idn > 0) & (idn < len(g) - 1)
    gdev = _abs_dev(gr[ok], fd[ok])
    extra = f",lam={lam:g},mu={mu:g}"
    return [
        CheckResult(_name("oracle/grid-value", fname, extra), vdev, ORACLE_TOL),
        CheckResult(_name("oracle/grid-gradient", fname, extra), gdev, ORACLE_GRAD_TOL,
                    f"{int(ok.sum())} of {n_points} points"),
    ]


def check_gradients(fn, fname, rng, n=500, pairs=CHAIN_PAIRS, step=1e-5) -> List[CheckResult]:
    """Closed-form gradient vs central differences of the closed-form value.

    Relative error ``|g - fd| / max(1, |g|)``.
    """
    dev = 0.0
    for lam, mu in pairs:
        p = EnvelopeParams(lam, mu)
        x = rng.uniform(DEFAULT_LO, DEFAULT_HI, n)
        gr = fn.ll_grad_1d(p, x)

        def value(t, p=p):
            return float(fn.ll_value_1d(p, np.array([t]))[0])

        fd = np.array([finite_diff_grad(value, float(t), step) for t in x])
        dev = max(dev, _max(np.abs(gr - fd) / np.maximum(1.0, np.abs(gr))))
    return [CheckResult(_name("gradient/finite-diff", fname), dev, GRAD_REL_TOL)]


def check_lipschitz(fn, fname, rng, n=10_000, pairs=CHAIN_PAIRS) -> List[CheckResult]:
    """Difference quotients of the gradient never exceed the Lipschitz bound.

    Half of the pairs are independent uniform draws, half are close pairs,
    which probe the steep pieces of the gradient.
    """
    dev = -math.inf
    for lam, mu in pairs:
        p = EnvelopeParams(lam, mu)
        bound = ll_lipschitz_bound(fn, p)
        x = rng.uniform(DEFAULT_LO, DEFAULT_HI, n)
        y = np.concatenate([
            rng.uniform(DEFAULT_LO, DEFAULT_HI, n // 2),
            # offsets of at least 0.02 mu keep rounding in the quotient below 1e-9
            x[n // 2:] + mu * rng.uniform(0.02, 0.5, n - n // 2)
            * rng.choice([-1.0, 1.0], n - n // 2),
        ])
        keep = x != y
        q = np.abs(fn.ll_grad_1d(p, x[keep]) - fn.ll_grad_1d(p, y[keep])) / np.abs(
            x[keep] - y[keep])
        dev = max(dev, _max(q - bound))
    return [CheckResult(_name("lipschitz/quotient", fname), max(dev, 0.0), LIP_SLACK)]


def check_monotonicity(fn, fname, rng, n=200) -> List[CheckResult]:
    """Nondecreasing in ``mu`` at fixed ``lam``; nonincreasing in ``lam`` at
    fixed ``lam - mu``; both over a 5x5 parameter grid."""
    x = rng.uniform(DEFAULT_LO, DEFAULT_HI, n)
    lams = (0.1, 0.3, 1.0, 3.0, 10.0)
    fracs = (0.1, 0.3, 0.5, 0.7, 0.9)
    dev = 0.0
    for lam in lams:
        vals = [fn.ll_value_1d(EnvelopeParams(lam, f * lam), x) for f in fracs]
        for a, b in zip(vals, vals[1:]):
            dev = max(dev, _excess(a, b))
    for nu in lams:
        vals = [fn.ll_value_1d(EnvelopeParams(nu + mu, mu), x) for mu in lams]
        for a, b in zip(vals, vals[1:]):
            dev = max(dev, _excess(b, a))
    return [CheckResult(_name("monotone/parameters", fname), dev, CHAIN_TOL)]


_ARGMIN_SETS = {
    "binary": lambda x: np.minimum(np.abs(x), np.abs(x - 1.0)),
    "l0": np.abs,
    "l1": np.abs,
    "box": lambda x: np.maximum(0.0, np.maximum(-x, x - 1.0)),
    "zero": np.zeros_like,
}


def check_inf_preservation(fn, fname, lam=1.0, mu=0.5, step=1e-4) -> List[CheckResult]:
    """``min h^{lam,mu}`` over a fine grid equals ``inf h = 0`` and is attained
    within one grid step of ``argmin h``."""
    x = Grid1D.points_for(DEFAULT_LO, DEFAULT_HI, step)
    v = fn.ll_value_1d(EnvelopeParams(lam, mu), x)
    i = int(np.argmin(v))
    out = [CheckResult(_name("inf-preservation/value", fname), abs(float(v[i])), INF_TOL)]
    dist = _ARGMIN_SETS.get(fname)
    if dist is not None:
        out.append(CheckResult(_name("inf-preservation/argmin", fname),
                               float(dist(np.array([x[i]]))[0]), step))
    return out


def check_symmetry(fn, fname, rng, n=1000) -> List[CheckResult]:
    """Exact reflection symmetry: about 1/2 for binary, about 0 for l0.

    Dyadic points make ``1 - x`` exact in floating point.
    """
    x = rng.integers(-5 * 1024, 6 * 1024, n) / 1024.0
    dev = 0.0
    mono = 0.0
    for lam, mu in CHAIN_PAIRS:
        p = EnvelopeParams(lam, mu)
        if fname == "binary":
            dev = max(dev, _max(np.abs(fn.ll_value_1d(p, x) - fn.ll_value_1d(p, 1.0 - x))))
        elif fname == "l0":
            dev = max(dev, _max(np.abs(fn.ll_value_1d(p, x) - fn.ll_value_1d(p, -x))))
            t = np.sort(np.abs(x))
            mono = max(mono, _max(-np.diff(fn.ll_value_1d(p, t))))
    out = [CheckResult(_name("symmetry", fname), dev, 0.0)]
    if fname == "l0":
        out.append(CheckResult(_name("monotone/radial", fname), mono, 0.0))
    return out


def check_convexity(fn, fname, rng, n=1000) -> List[CheckResult]:
    """Midpoint convexity along random segments and a nonnegative curvature
    lower bound (for convex ``h``)."""
    dev = 0.0
    low = math.inf
    for lam, mu in CHAIN_PAIRS:
        p = EnvelopeParams(lam, mu)
        a = rng.uniform(DEFAULT_LO, DEFAULT_HI, n)
        b = rng.uniform(DEFAULT_LO, DEFAULT_HI, n)
        mid = fn.ll_value_1d(p, 0.5 * (a + b))
        chord = 0.5 * (fn.ll_value_1d(p, a) + fn.ll_value_1d(p, b))
        dev = max(dev, _excess(mid, chord))
        low = min(low, curvature_bounds(fn, p)[0])
    return [
        CheckResult(_name("convexity/midpoint", fname), dev, CHAIN_TOL),
        CheckResult(_name("convexity/curvature-lower", fname), max(0.0, -low), 0.0),
    ]


def check_separability(fn, fname, rng, n=50) -> List[CheckResult]:
    """Vector envelope value equals the sum of its 1-D restrictions."""
    x = rng.uniform(DEFAULT_LO, DEFAULT_HI, n)
    dev = 0.0
    for lam, mu in CHAIN_PAIRS:
        p = EnvelopeParams(lam, mu)
        parts = np.array([ll_value(fn, p, [t]) for t in x])
        dev = max(dev, abs(ll_value(fn, p, x) - float(np.sum(parts))))
    return [CheckResult(_name("separability", fname), dev, 0.0)]


def check_prox(fn, fname, gammas=(0.1, 1.0, 7.0), n_points=441) -> List[CheckResult]:
    """The closed-form prox is at least as good as every grid candidate."""
    g = _grid(fn)
    x = np.round(np.linspace(DEFAULT_LO, DEFAULT_HI, n_points), 10)
    dev = 0.0
    for gamma in gammas:
        w = fn.prox_1d(gamma, x)
        achieved = fn.eval_1d(w) + (w - x) ** 2 / (2.0 * gamma)
        best = grid_moreau_at(g, gamma, x)
        dev = max(dev, _excess(achieved, best + 1e-12))
    return [CheckResult(_name("prox/optimality", fname), dev, 1e-9)]


def check_composition_identity(fn, fname, lam=1.0, mu=0.5, grid=None) -> List[CheckResult]:
    """``h^{lam,mu} = (h^{lam,lam})^{lam-mu} = (h^{lam-mu})^{mu,mu}``,
    all three built from the grid oracle, on the interior of the grid."""
    g = _grid(fn) if grid is None else grid
    p = EnvelopeParams(lam, mu)
    direct = grid_ll_at(g, p, g.points, moreau=grid_moreau(g, lam))
    via_hull = grid_moreau(grid_proximal_hull(g, lam), p.nu).values
    via_moreau = grid_proximal_hull(grid_moreau(g, p.nu), mu).values
    inner = _interior(g) & (direct < 1e6)
    dev = max(_abs_dev(direct[inner], via_hull[inner]),
              _abs_dev(direct[inner], via_moreau[inner]))
    return [CheckResult(_name("identity/composition", fname), dev, COMPOSITION_TOL)]


def check_conjugate_identities(fn, fname, lam=1.0, mu=0.5, grid=None) -> List[CheckResult]:
    """The four conjugate forms of the envelopes, with ``phi = h + q/lam``
    and ``q = |.|^2 / 2``, via the discrete Legendre transform:

    * ``h^lam = q/lam - phi*(./lam)``
    * ``h^{lam,lam} = phi** - q/lam``
    * ``h^{lam,mu} = q/(lam-mu) - (phi*)^{1/c}(./(lam-mu))``
    * ``h^{lam,mu} = (phi**)^c(lam ./mu) - q/mu``
    """
    g = _grid(fn) if grid is None else grid
    p = EnvelopeParams(lam, mu)
    nu, c = p.nu, p.c
    w = g.points
    phi = g.with_values(g.values + w**2 / (2.0 * lam))
    slopes = Grid1D.span(SLOPE_LO, SLOPE_HI, SLOPE_STEP)
    phi_star = grid_conjugate(phi, slopes)
    phi_bi = grid_conjugate(phi_star, w)

    # every 10th interior point; the refined suprema dominate the cost
    inner = np.flatnonzero(_interior(g))[::10]
    x = w[inner]
    m = grid_moreau(g, lam)
    moreau = m.values[inner]
    ll, i_ll = grid_ll_at(g, p, x, refine=REFINE, return_index=True, moreau=m)
    hull, i_hull = grid_proximal_hull_at(g, lam, x, refine=REFINE, return_index=True,
                                        moreau=m)
    # suprema cut off by the grid edge (argmax on the boundary) are unreliable
    ok_ll = (i_ll > 0) & (i_ll < len(g) - 1)
    ok_hull = (i_hull > 0) & (i_hull < len(g) - 1)

    item2 = x**2 / (2.0 * lam) - grid_conjugate(phi, x / lam)
    item3 = phi_bi[inner] - x**2 / (2.0 * lam)
    item4 = x**2 / (2.0 * nu) - grid_moreau_at(phi_star, 1.0 / c, x / nu)
    item5 = grid_moreau_at(g.with_values(np.minimum(phi_bi, 1e12)), c, lam * x / mu) - (
        x**2 / (2.0 * mu))

    return [
        CheckResult(_name("identity/moreau-conjugate", fname), _abs_dev(moreau, item2),
                    CONJUGATE_TOL),
        CheckResult(_name("identity/hull-biconjugate", fname),
                    _abs_dev(hull[ok_hull], item3[ok_hull]), CONJUGATE_TOL),
        CheckResult(_name("identity/ll-conjugate", fname), _abs_dev(ll[ok_ll], item4[ok_ll]),
                    CONJUGATE_TOL),
        CheckResult(_name("identity/ll-biconjugate", fname),
                    _abs_dev(ll[ok_ll], item5[ok_ll]), CONJUGATE_TOL),
    ]


def _per_function(check: Callable, needs_rng=True, only: Optional[Sequence[str]] = None):
    def run(functions, rng):
        out = []
        for fname, fn in functions.items():
            if only is not None and fname not in only:
                continue
            out.extend(check(fn, fname, rng) if needs_rng else check(fn, fname))
        return out

    return run


SUITES: Dict[str, List[Callable]] = {
    "envelope": [
        _per_function(check_ordering_chain),
        _per_function(check_oracle_chain),
        _per_function(check_monotonicity),
        _per_function(check_inf_preservation, needs_rng=False),
        _per_function(check_symmetry, only=("binary", "l0")),
        _per_function(check_convexity, only=("box", "l1")),
        _per_function(check_separability),
        _per_function(check_prox, needs_rng=False),
    ],
    "oracle-grid": [_per_function(check_oracle_grid, needs_rng=False)],
    "identities": [
        _per_function(check_composition_identity, needs_rng=False),
        _per_function(check_conjugate_identities, needs_rng=False),
    ],
    "gradients": [
        _per_function(check_gradients),
        _per_function(check_lipschitz),
    ],
}


def run_checks(functions: Optional[Dict[str, SeparableNonsmoothFunction]] = None,
               suites: Optional[Iterable[str]] = None, seed: int = 0) -> List[CheckResult]:
    """Run the named suites (all by default) on ``functions``."""
    functions = FUNCTIONS if functions is None else functions
    names = list(SUITES) if suites is None else list(suites)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}")
    rng = np.random.default_rng(seed)
    out = []
    for s in names:
        for run in SUITES[s]:
            out.extend(run(functions, rng))
    return out


def results_csv(results: Sequence[CheckResult]) -> str:
    """CSV with columns ``check, deviation, tolerance, passed, detail``."""
    lines = ["check,deviation,tolerance,passed,detail"]
    for r in results:
        lines.append(f"{r.name},{r.deviation:.17g},{r.tolerance:.17g},"
                     f"{int(r.passed)},{r.detail}")
    return "\n".join(lines) + "\n"
