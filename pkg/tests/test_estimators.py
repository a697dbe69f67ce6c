import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from monotrend.estimators import (
    BoundarySpec,
    PenaltySpec,
    boundary_corrected_last,
    isotonic_trend,
    kappa,
    penalized_last,
    snap_index,
    xi_statistic,
)
from monotrend.isotonic import minmax_oracle
from monotrend.stochastic import TrendFunction

series = arrays(np.float64, st.integers(1, 80), elements=st.floats(-5, 5, allow_nan=False))
positive = arrays(np.float64, st.integers(1, 40), elements=st.floats(0.01, 5))


@pytest.mark.parametrize("y, fit", [([3, 1], [2, 2]), ([1, 2, 3], [1, 2, 3]), ([2, 1, 4, 3, 5], [1.5, 1.5, 3.5, 3.5, 5])])
def test_isotonic_trend_examples(y, fit):
    assert isotonic_trend(y).mu_tilde.tolist() == fit


def test_trend_fit_levels_and_steps():
    fit = isotonic_trend([2, 1, 4, 3, 5])
    assert fit.knots.tolist() == [0, 2, 4, 5]
    assert fit.levels().tolist() == [1.5, 3.5, 5.0]
    t, level = fit.step_coordinates()
    assert t.tolist() == [0.0, 0.4, 0.4, 0.8, 0.8, 1.0]
    assert level.tolist() == [1.5, 1.5, 3.5, 3.5, 5.0, 5.0]


def test_penalized_examples():
    assert penalized_last([5.0], PenaltySpec(lam=0.0)) == 5.0
    assert penalized_last([1, 2, 3], PenaltySpec(lam=1.0)) == pytest.approx(5 / 3)
    assert penalized_last([1, 2, 3], PenaltySpec(lam=1.0), return_index=True) == (pytest.approx(5 / 3), 2)


def test_penalized_tie_reports_smallest_index():
    value, i = penalized_last([1.0, 1.0], PenaltySpec(lam=0.0), return_index=True)
    assert (value, i) == (1.0, 1)


def test_penalty_rate_rule():
    assert PenaltySpec(alpha=2.0).resolve(125) == pytest.approx(10.0)
    assert PenaltySpec(alpha=2.0, lam=0.5).resolve(125) == 0.5
    with pytest.raises(ValueError):
        PenaltySpec(alpha=0.0)
    with pytest.raises(ValueError):
        PenaltySpec(lam=-1.0)


def test_boundary_examples():
    y = [2, 1, 4, 3, 5]
    assert boundary_corrected_last(y, BoundarySpec(m=3)) == 3.5
    assert boundary_corrected_last(y, BoundarySpec(m=5)) == 5.0
    assert BoundarySpec(ell=1.0).resolve(150) == 144
    # exact cube: 125^(1/3) = 5 must not round up to 6
    assert BoundarySpec(ell=1.0).resolve(125) == 120
    assert all(BoundarySpec(ell=0.01).resolve(n) < n for n in range(2, 300))


def test_boundary_range_errors():
    with pytest.raises(ValueError):
        BoundarySpec(ell=0.0)
    with pytest.raises(ValueError):
        BoundarySpec(m=0).resolve(10)
    with pytest.raises(ValueError):
        BoundarySpec(ell=10.0).resolve(8)


def test_kappa_examples():
    assert kappa(math.sqrt(0.1875), 1.0) == pytest.approx(0.45428, abs=5e-6)
    assert kappa(math.sqrt(0.1875), 4 / 3) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        kappa(0.5, 0.0)


def test_xi_noiseless_is_pure_bias():
    n = 150
    phi = TrendFunction.from_name("identity")
    y = phi(np.arange(1, n + 1) / n)
    xi, _ = xi_statistic(y, phi, 0.5)
    assert abs(xi) <= n ** (1 / 3) / n


def test_xi_snapping_and_scaling():
    rng = np.random.default_rng(3)
    y = np.sqrt(np.arange(1, 151) / 150) + 0.25 * rng.standard_normal(150)
    phi = TrendFunction.from_name("sqrt")
    assert xi_statistic(y, phi, 0.5034) == xi_statistic(y, phi, 75 / 150)
    xi, scaled = xi_statistic(y, phi, 0.5, sigma=0.25)
    assert scaled == pytest.approx(xi / kappa(0.25, phi.prime(0.5)))
    assert snap_index(150, 1 / 3) == 50
    with pytest.raises(ValueError):
        xi_statistic(y, phi, 0.001)


@settings(max_examples=200, deadline=None)
@given(series)
def test_degeneracies_exact(y):
    last = isotonic_trend(y).mu_tilde[-1]
    assert penalized_last(y, PenaltySpec(lam=0.0)) == last
    assert boundary_corrected_last(y, BoundarySpec(m=y.size)) == last


@settings(deadline=None)
@given(series)
def test_isotonic_trend_matches_oracle(y):
    fit = isotonic_trend(y).mu_tilde
    assert np.all(np.diff(fit) >= 0)
    k = y.size
    assert fit[-1] == pytest.approx(minmax_oracle(y, k), rel=1e-10, abs=1e-10)


@settings(deadline=None)
@given(positive, st.floats(0, 10), st.floats(0, 10))
def test_penalized_nonincreasing_in_lambda(y, a, b):
    lo, hi = sorted((a, b))
    assert penalized_last(y, PenaltySpec(lam=hi)) <= penalized_last(y, PenaltySpec(lam=lo)) + 1e-12


@settings(deadline=None)
@given(positive, st.floats(0, 5))
def test_penalized_continuous_in_lambda(y, lam):
    a = penalized_last(y, PenaltySpec(lam=lam))
    b = penalized_last(y, PenaltySpec(lam=lam + 1e-8))
    assert abs(a - b) <= 1e-6 * max(1.0, abs(a))


@settings(deadline=None)
@given(series, st.floats(-10, 10))
def test_location_equivariance(y, b):
    tol = dict(rel=1e-9, abs=1e-9)
    assert isotonic_trend(y + b).mu_tilde == pytest.approx(isotonic_trend(y).mu_tilde + b, **tol)
    bs = BoundarySpec(m=max(1, y.size // 2))
    assert boundary_corrected_last(y + b, bs) == pytest.approx(boundary_corrected_last(y, bs) + b, **tol)
    # only exact for lam = 0: the penalty shrinks towards 0, not towards b
    p = PenaltySpec(lam=0.0)
    assert penalized_last(y + b, p) == pytest.approx(penalized_last(y, p) + b, **tol)
