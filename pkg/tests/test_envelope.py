import math

import numpy as np
import pytest

from llhomotopy.envelope import (
    EnvelopeParams,
    ParameterError,
    ProximalHullParams,
    RegularityInfo,
    curvature_bounds,
    ll_gradient,
    ll_lipschitz_bound,
    ll_value,
    moreau_value,
    proximal_hull_value,
)
from llhomotopy.functions import BinaryIndicator, BoxIndicator, ScaledL0, ZeroFunction


class _Known(ZeroFunction):
    """Zero function advertising arbitrary regularity moduli."""

    def __init__(self, **reg):
        object.__setattr__(self, "_reg", RegularityInfo(**reg))

    @property
    def regularity(self):
        return self._reg


def test_params_validation():
    p = EnvelopeParams(2.0, 0.5)
    assert p.nu == 1.5
    assert p.c == pytest.approx(2.0 * 1.5 / 0.5)
    for lam, mu in [(1.0, 1.0), (1.0, 2.0), (0.0, -1.0), (1.0, 0.0), (math.inf, 1.0)]:
        with pytest.raises(ParameterError):
            EnvelopeParams(lam, mu)
    with pytest.raises(ParameterError):
        ProximalHullParams(0.0)


def test_regularity_validation():
    with pytest.raises(ParameterError):
        RegularityInfo(sigma=2.0, lipschitz=1.0)
    with pytest.raises(ParameterError):
        RegularityInfo(prox_bound=0.0)
    assert RegularityInfo(sigma=-1.0, lipschitz=1.0).sigma == -1.0


def test_prox_bound_recorded_infinite():
    assert BinaryIndicator().regularity.prox_bound == math.inf
    assert ScaledL0(1.0).regularity.prox_bound == math.inf


# frozen values; recomputed with the grid oracle in test_oracle.py
def test_moreau_examples():
    assert moreau_value(BinaryIndicator(), 0.5, [0.0]) == 0.0
    assert moreau_value(BinaryIndicator(), 1.0, [0.5]) == pytest.approx(0.125, abs=1e-12)
    assert moreau_value(ScaledL0(1.0), 1.0, [3.0, 0.0]) == pytest.approx(1.0, abs=1e-12)


def test_ll_value_examples():
    p = EnvelopeParams(1.0, 0.5)
    f = BinaryIndicator()
    assert ll_value(f, p, [0.0]) == 0.0
    assert ll_value(f, p, [0.5]) == pytest.approx(0.125, abs=1e-12)
    assert ll_value(f, p, [0.25]) == pytest.approx(0.0625, abs=1e-12)


def test_ll_gradient_examples():
    p = EnvelopeParams(1.0, 0.5)
    f = BinaryIndicator()
    np.testing.assert_allclose(ll_gradient(f, p, [0.5]), [0.0], atol=1e-15)
    np.testing.assert_allclose(ll_gradient(f, p, [0.0]), [0.0], atol=1e-15)
    np.testing.assert_allclose(ll_gradient(f, p, [0.25]), [0.5], atol=1e-12)


def test_proximal_hull_examples():
    f = BinaryIndicator()
    assert proximal_hull_value(f, ProximalHullParams(1.0), [0.0]) == 0.0
    assert proximal_hull_value(f, ProximalHullParams(1.0), [0.5]) == pytest.approx(0.125)
    assert proximal_hull_value(ZeroFunction(), 1.0, [7.0]) == 0.0
    assert proximal_hull_value(f, 1.0, [1.5]) == math.inf


def test_lipschitz_bound_examples():
    f = BinaryIndicator()
    assert ll_lipschitz_bound(f, EnvelopeParams(1.0, 0.5)) == pytest.approx(2.0)
    assert ll_lipschitz_bound(f, EnvelopeParams(2.0, 0.5)) == pytest.approx(2.0)
    smooth = _Known(lipschitz=1.0)
    assert ll_lipschitz_bound(smooth, EnvelopeParams(2.0, 1.0)) == pytest.approx(0.5)


def test_lipschitz_bound_sigma_branch():
    # sigma = 0: max(0, 1/nu) improves on max(1/mu, 1/nu) when mu < nu
    f = _Known(sigma=0.0)
    assert ll_lipschitz_bound(f, EnvelopeParams(1.0, 0.25)) == pytest.approx(1 / 0.75)
    # 1 + nu*sigma <= 0 leaves only the general bound
    g = _Known(sigma=-4.0)
    assert ll_lipschitz_bound(g, EnvelopeParams(1.0, 0.5)) == pytest.approx(2.0)


def test_curvature_bounds_examples():
    assert curvature_bounds(BinaryIndicator(), EnvelopeParams(1.0, 0.5)) == pytest.approx(
        (-2.0, 2.0))
    assert curvature_bounds(BoxIndicator(), EnvelopeParams(1.0, 0.5)) == pytest.approx(
        (0.0, 2.0))
    lo, hi = curvature_bounds(_Known(lipschitz=2.0), EnvelopeParams(1.5, 0.5))
    assert (lo, hi) == pytest.approx((-2 / 3, 2 / 3))
    assert lo <= hi


def test_errors_on_bad_input():
    f = BinaryIndicator()
    with pytest.raises(ParameterError):
        moreau_value(f, 0.0, [1.0])
    with pytest.raises(ParameterError):
        ll_value(f, (1.0, 0.5), [1.0])
    with pytest.raises(ValueError):
        ll_value(f, EnvelopeParams(1.0, 0.5), [np.nan])
    capped = _Known(prox_bound=2.0)
    with pytest.raises(ParameterError):
        moreau_value(capped, 2.0, [0.0])
    with pytest.raises(ParameterError):
        ll_value(capped, EnvelopeParams(3.0, 1.0), [0.0])


def test_vector_value_is_sum_of_coordinates(named_function, rng):
    _, f = named_function
    p = EnvelopeParams(1.3, 0.4)
    x = rng.uniform(-5, 6, 30)
    assert ll_value(f, p, x) == float(np.sum(f.ll_value_1d(p, x)))
    np.testing.assert_array_equal(ll_gradient(f, p, x),
                                  [ll_gradient(f, p, [t])[0] for t in x])
