"""Synthetic trend-plus-AR(1) series, long-run variance and correlograms."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from monotrend import kernels
from monotrend.isotonic import TimeSeries


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the tuple ``(seed, *keys)``.

    Every replication asks for its own stream, so results never depend on
    the order or thread in which replications run.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *keys])))


def tag(*parts) -> int:
    """Stable 32-bit stream key for a tuple of labels."""
    return zlib.crc32("|".join(repr(p) for p in parts).encode())


@dataclass(frozen=True)
class Ar1Spec:
    """Stationary Gaussian AR(1): X_k = rho X_{k-1} + eps_k, sd(X_k) = marginal_sd."""

    rho: float
    marginal_sd: float = 0.25
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if not self.marginal_sd > 0:
            raise ValueError(f"marginal_sd must be positive, got {self.marginal_sd}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")

    @property
    def innovation_sd(self) -> float:
        return self.marginal_sd * np.sqrt(1.0 - self.rho**2)


@dataclass(frozen=True)
class TrendFunction:
    """A continuous nondecreasing trend on [0, 1] with its derivative."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def prime(self, t):
        return self.deriv(np.asarray(t, dtype=float))

    @classmethod
    def from_name(cls, name: str) -> "TrendFunction":
        try:
            return _BUILTIN_TRENDS[name]
        except KeyError:
            raise ValueError(f"unknown trend {name!r}; choose from {sorted(_BUILTIN_TRENDS)}") from None

    @classmethod
    def custom(cls, func, deriv=None, name: str = "custom", check_points: int = 201) -> "TrendFunction":
        """Wrap a user trend; a central-difference derivative is used if none is given."""
        if deriv is None:
            h = 1e-6

            def deriv(t):
                t = np.asarray(t, dtype=float)
                lo = np.clip(t - h, 0.0, 1.0)
                hi = np.clip(t + h, 0.0, 1.0)
                return (func(hi) - func(lo)) / (hi - lo)

        grid = np.linspace(0.0, 1.0, check_points)
        vals = np.asarray(func(grid), dtype=float)
        if np.any(np.diff(vals) < 0):
            raise ValueError("trend function must be nondecreasing on [0, 1]")
        return cls(name, func, deriv)


def _sqrt_prime(t):
    with np.errstate(divide="ignore"):
        return 0.5 / np.sqrt(t)


_BUILTIN_TRENDS = {
    "sqrt": TrendFunction("sqrt", np.sqrt, _sqrt_prime),
    "identity": TrendFunction("identity", lambda t: t * 1.0, lambda t: np.ones_like(t)),
    "square": TrendFunction("square", lambda t: t * t, lambda t: 2.0 * t),
}


def ar1_path(n: int, spec: Ar1Spec, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Stationary AR(1) sample X_1..X_n.

    X_0 is drawn from the marginal law N(0, marginal_sd^2), then the
    recursion runs ``burn_in + n`` steps and the first ``burn_in`` are
    dropped.  Without ``rng`` the path is driven by ``spec.seed``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if rng is None:
        rng = stream(spec.seed)
    x0 = spec.marginal_sd * rng.standard_normal()
    eps = spec.innovation_sd * rng.standard_normal(n + spec.burn_in)
    return kernels.ar1_filter(x0, eps, spec.rho)[spec.burn_in:]


def long_run_variance_ar1(spec: Ar1Spec) -> float:
    """sigma^2 = lim Var(S_n)/n = marginal_sd^2 (1 + rho)/(1 - rho)."""
    if not abs(spec.rho) < 1:
        raise ValueError("long-run variance needs |rho| < 1")
    return spec.marginal_sd**2 * (1.0 + spec.rho) / (1.0 - spec.rho)


def synthesize(n: int, phi: TrendFunction, spec: Ar1Spec, rng: Optional[np.random.Generator] = None) -> TimeSeries:
    """y_k = phi(k/n) + X_k, recording the true trend and the noise."""
    noise = ar1_path(n, spec, rng)
    trend = np.asarray(phi(np.arange(1, n + 1) / n), dtype=float)
    return TimeSeries(trend + noise, labels=None, trend=trend, noise=noise)


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    autocorrelations: np.ndarray


def acf(series: Sequence[float], max_lag: int) -> AcfResult:
    """Sample autocorrelations r_0..r_L, mean-centred, biased (1/n) covariances."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if max_lag < 0 or max_lag >= n:
        raise ValueError(f"max_lag must be in [0, {n - 1}], got {max_lag}")
    d = x - x.mean()
    c0 = float(d @ d) / n
    if c0 <= np.finfo(float).tiny or np.ptp(x) == 0:
        raise ValueError("series has zero variance")
    r = np.array([float(d[: n - h] @ d[h:]) / n / c0 for h in range(max_lag + 1)])
    r[0] = 1.0
    return AcfResult(np.arange(max_lag + 1), r)
