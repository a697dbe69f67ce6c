"""Trend estimators: isotonic fit, penalized and boundary-corrected last point."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from monotrend import kernels
from monotrend.isotonic import SeriesLike, as_values, isotonic_slopes
from monotrend.stochastic import TrendFunction


@dataclass(frozen=True)
class TrendFit:
    """Isotonic trend estimate mu_tilde_1..mu_tilde_n.

    ``knots`` holds the level-set boundaries as 0-based cumulative-sum
    indices (0 and n included); block ``j`` covers observations
    ``knots[j]+1 .. knots[j+1]`` in 1-based terms.
    """

    mu_tilde: np.ndarray
    knots: np.ndarray
    n: int

    def levels(self) -> np.ndarray:
        return self.mu_tilde[self.knots[1:] - 1]

    def step_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """(t, level) vertices of the fitted step function on [0, 1]."""
        edges = self.knots / self.n
        levels = self.levels()
        t = np.repeat(edges, 2)[1:-1]
        return t, np.repeat(levels, 2)


@dataclass(frozen=True)
class PenaltySpec:
    """lambda_n = alpha * n^(1/3) unless ``lam`` is given explicitly."""

    alpha: float = 1.0
    lam: Optional[float] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.lam is not None and not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")

    def resolve(self, n: int) -> float:
        if self.lam is not None:
            return float(self.lam)
        return self.alpha * n ** (1.0 / 3.0)


@dataclass(frozen=True)
class BoundarySpec:
    """m_n = n - ceil(ell * n^(1/3)) unless ``m`` is given explicitly."""

    ell: float = 1.0
    m: Optional[int] = None

    def __post_init__(self):
        if not self.ell > 0:
            raise ValueError(f"ell must be positive, got {self.ell}")

    def resolve(self, n: int) -> int:
        if self.m is not None:
            m = int(self.m)
        else:
            # guard against cbrt rounding pushing an exact integer up by one
            offset = math.ceil(self.ell * n ** (1.0 / 3.0) - 1e-9)
            m = n - offset
        if not 1 <= m <= n:
            raise ValueError(f"resolved m={m} outside [1, {n}]")
        return m


def isotonic_trend(y: SeriesLike) -> TrendFit:
    values = as_values(y)
    slopes, knots = isotonic_slopes(values)
    return TrendFit(slopes, knots, values.size)


def penalized_last(y: SeriesLike, p: PenaltySpec = PenaltySpec(), return_index: bool = False):
    """max_i (y_i + ... + y_n)/(n - i + 1 + lambda_n).

    With ``return_index`` the (1-based) smallest maximizing ``i`` is
    returned as well.
    """
    values = as_values(y)
    n = values.size
    lam = p.resolve(n)
    sums = kernels.compensated_cumsum(values)
    # last slope of the minorant with the end point pushed out to n + lam;
    # at lam = 0 this is the same computation as mu_tilde_n, bit for bit
    idx = np.arange(n + 1, dtype=float)
    idx[n] += lam
    knots = kernels.gcm_knots(idx, sums)
    value = float(kernels.knot_slopes(idx, sums, knots)[-1])
    if not return_index:
        return value
    starts = np.arange(n)
    ratios = (sums[n] - sums[starts]) / ((n - starts) + lam)
    return value, int(np.argmax(ratios)) + 1


def boundary_corrected_last(y: SeriesLike, b: BoundarySpec = BoundarySpec()) -> float:
    """mu_tilde at the interior index m_n, used in place of mu_tilde_n."""
    values = as_values(y)
    m = b.resolve(values.size)
    return float(isotonic_trend(values).mu_tilde[m - 1])


def snap_index(n: int, t: float) -> int:
    """k = floor(n t), tolerant of t = k/n having been rounded down."""
    return int(math.floor(n * t + 1e-9))


def kappa(sigma: float, phi_prime: float) -> float:
    """Interior scale (sigma^2 phi'(t) / 2)^(1/3)."""
    if not phi_prime > 0:
        raise ValueError(f"phi'(t) must be positive for scaling, got {phi_prime}")
    return (0.5 * sigma**2 * phi_prime) ** (1.0 / 3.0)


def xi_statistic(
    y: SeriesLike,
    phi: TrendFunction,
    t_n: float,
    sigma: Optional[float] = None,
    fit: Optional[TrendFit] = None,
) -> tuple[float, Optional[float]]:
    """n^(1/3)[mu_tilde(t_n) - phi(t_n)] and its kappa-scaled version.

    ``t_n`` is snapped to floor(n t_n)/n first.  The scaled value is
    ``None`` when ``sigma`` is not supplied.
    """
    values = as_values(y)
    n = values.size
    if not 0 < t_n <= 1:
        raise ValueError(f"t_n={t_n} outside (0, 1]")
    k = snap_index(n, t_n)
    if k < 1:
        raise ValueError(f"t_n={t_n} snaps to index 0 for n={n}")
    if fit is None:
        fit = isotonic_trend(values)
    t = k / n
    xi = n ** (1.0 / 3.0) * (fit.mu_tilde[k - 1] - float(phi(t)))
    if sigma is None:
        return float(xi), None
    return float(xi), float(xi / kappa(sigma, float(phi.prime(t))))
