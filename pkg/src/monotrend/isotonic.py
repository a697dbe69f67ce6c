"""Greatest convex minorants, pool-adjacent-violators and the min-max oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from monotrend import kernels


@dataclass(frozen=True)
class TimeSeries:
    """Observed values with optional time labels.

    ``trend`` and ``noise`` are filled in by the synthetic generator so the
    estimation error can be scored; they are ``None`` for real data.
    """

    values: np.ndarray
    labels: Optional[Sequence] = None
    trend: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.labels is not None and len(self.labels) != len(self.values):
            raise ValueError("labels and values differ in length")

    def __len__(self) -> int:
        return len(self.values)


SeriesLike = Union[TimeSeries, Sequence[float], np.ndarray]


def as_values(y: SeriesLike) -> np.ndarray:
    """Return the observations of ``y`` as a 1-d float array (n >= 1)."""
    if isinstance(y, TimeSeries):
        arr = y.values
    else:
        arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d series, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty series")
    if not np.all(np.isfinite(arr)):
        raise ValueError("series contains non-finite values")
    return arr


@dataclass(frozen=True)
class Diagram:
    """Points of a piecewise-linear diagram, abscissas strictly increasing."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("abscissas and ordinates must be 1-d and equal length")
        if x.size < 2:
            raise ValueError("a diagram needs at least 2 points")
        if not np.all(np.diff(x) > 0):
            raise ValueError("abscissas must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __len__(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class GcmFit:
    """Greatest convex minorant of a :class:`Diagram`.

    ``knots`` are diagram indices where the minorant touches; ``slopes[i]``
    is the left-hand slope at abscissa ``x[i + 1]``.
    """

    diagram: Diagram
    knots: np.ndarray
    slopes: np.ndarray

    def values(self) -> np.ndarray:
        """Minorant ordinates at every diagram abscissa."""
        x, y = self.diagram.x, self.diagram.y
        return np.interp(x, x[self.knots], y[self.knots])

    def left_derivative(self, t: float) -> float:
        return left_derivative(self, t)


@dataclass(frozen=True)
class Weights:
    w: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and strictly positive")
        object.__setattr__(self, "w", w)


def cusum_diagram(y: SeriesLike) -> Diagram:
    """Cumulative sum diagram ``(k/n, (y_1 + ... + y_k)/n)``, k = 0..n."""
    values = as_values(y)
    n = values.size
    sums = kernels.compensated_cumsum(values)
    return Diagram(np.arange(n + 1) / n, sums / n)


def gcm(d: Diagram) -> GcmFit:
    """Greatest convex minorant of ``d`` by one amortized-linear stack pass."""
    knots = kernels.gcm_knots(d.x, d.y)
    slopes = kernels.knot_slopes(d.x, d.y, knots)
    return GcmFit(d, knots, slopes)


def isotonic_slopes(y: SeriesLike) -> tuple[np.ndarray, np.ndarray]:
    """Equal-weight isotonic fit of ``y`` and its knot indices.

    Slopes come from integer-indexed partial sums, so each fitted level is
    exactly a block mean ``(S_b - S_a)/(b - a)``.
    """
    values = as_values(y)
    n = values.size
    sums = kernels.compensated_cumsum(values)
    idx = np.arange(n + 1, dtype=float)
    knots = kernels.gcm_knots(idx, sums)
    return kernels.knot_slopes(idx, sums, knots), knots


def pava(y: SeriesLike, w: Union[Weights, Sequence[float], np.ndarray, None] = None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit (pool adjacent violators).

    Args:
      y: observations.
      w: positive weights, one per observation; unit weights if omitted.

    Returns:
      The fitted values. Each level set carries the weighted mean of its block.
    """
    values = as_values(y)
    if w is None:
        weights = np.ones_like(values)
    else:
        weights = w.w if isinstance(w, Weights) else Weights(w).w
    if weights.size != values.size:
        raise ValueError(f"{weights.size} weights for {values.size} observations")
    return kernels.pava(values, weights)


def minmax_oracle(y: SeriesLike, k: int) -> float:
    """``max_{i<=k} min_{k<=j<=n} mean(y_i..y_j)`` by exhaustive enumeration.

    O(n^2) work for one index ``k`` (1-based).  Only meant for checking the
    fast fitters.
    """
    values = as_values(y)
    n = values.size
    if not 1 <= k <= n:
        raise IndexError(f"k={k} outside 1..{n}")
    prefix = np.concatenate(([0.0], np.cumsum(values)))
    i = np.arange(1, k + 1)[:, None]
    j = np.arange(k, n + 1)[None, :]
    means = (prefix[j] - prefix[i - 1]) / (j - i + 1)
    return float(means.min(axis=1).max())


def left_derivative(fit: GcmFit, t: float) -> float:
    """Slope of the minorant segment immediately left of ``t``.

    ``t`` must lie in ``(x_0, x_last]``; at a knot the incoming slope is
    returned.
    """
    x = fit.diagram.x
    if not x[0] < t <= x[-1]:
        raise ValueError(f"t={t} outside ({x[0]}, {x[-1]}]")
    i = int(np.searchsorted(x, t, side="left"))
    return float(fit.slopes[i - 1])
