"""Monte Carlo samplers for the three limit laws of the trend estimators.

* Chernoff's law, 2 argmin_s [W(s) + s^2]  (interior points);
* the boundary-corrected law, [G_(-inf, ell] (sigma W(s) + phi'(1) s^2 / 2)]'(0) - ell phi'(1);
* the penalized law, sup_{t>0} [sigma W(t) - alpha phi(1) - phi'(1) t^2 / 2] / t.

Brownian paths live on a grid of spacing ``step`` that contains 0.  Each arm
of each replication has its own random stream, and a path on a finer grid is
built by Brownian-bridge bisection of the coarser one (``base_step``), so
refinement and window-enlargement checks compare coupled samples.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from monotrend import kernels
from monotrend.parallel import map_reps
from monotrend.stochastic import stream, tag

#: percentile probes of the interior tables
TABLE_PS = (0.025, 0.05, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 0.95, 0.975)
#: z probes of the boundary and penalized tables
TABLE_Z = tuple(np.round(np.arange(-2.5, 2.51, 0.5), 1).tolist())

HIT_WARN = 0.01


@dataclass(frozen=True)
class BmGrid:
    """Grid ``{k * step : lower <= k * step <= upper}``; always contains 0.

    Endpoints are snapped to the nearest multiple of ``step``.
    """

    step: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not self.lower <= 0 <= self.upper or self.lower == self.upper:
            raise ValueError(f"grid [{self.lower}, {self.upper}] must contain 0 and have positive width")

    @property
    def n_left(self) -> int:
        return int(round(-self.lower / self.step))

    @property
    def n_right(self) -> int:
        return int(round(self.upper / self.step))

    @property
    def points(self) -> np.ndarray:
        return np.arange(-self.n_left, self.n_right + 1) * self.step

    def widened(self, factor: float = 2.0) -> "BmGrid":
        return BmGrid(self.step, self.lower * factor, self.upper * factor)

    def refined(self, factor: int = 2) -> "BmGrid":
        return BmGrid(self.step / factor, self.lower, self.upper)


def _bisections(step: float, base_step: float) -> int:
    ratio = base_step / step
    levels = int(round(math.log2(ratio))) if ratio >= 1 else -1
    if levels < 0 or not math.isclose(2.0**levels, ratio, rel_tol=1e-9):
        raise ValueError(f"base_step {base_step} must be step {step} times a power of two")
    return levels


@dataclass(frozen=True)
class BmStream:
    """Random source for one replication: ``(seed, law, rep)``."""

    seed: int
    law: int
    rep: int

    def arm(self, arm: int, count: int, step: float, base_step: Optional[float] = None) -> np.ndarray:
        """``count`` i.i.d. N(0, step) increments moving away from 0.

        With ``base_step = step * 2**L`` the increments are drawn at the
        coarse spacing and bisected L times, so the result refines the path
        that ``base_step`` alone would produce.
        """
        base_step = step if base_step is None else base_step
        levels = _bisections(step, base_step)
        base_count = -(-count // (1 << levels))
        inc = math.sqrt(base_step) * stream(self.seed, self.law, self.rep, arm, 0).standard_normal(base_count)
        h = base_step
        for level in range(1, levels + 1):
            h /= 2.0
            xi = math.sqrt(h / 2.0) * stream(self.seed, self.law, self.rep, arm, level).standard_normal(inc.size)
            fine = np.empty(2 * inc.size)
            fine[0::2] = 0.5 * inc + xi
            fine[1::2] = 0.5 * inc - xi
            inc = fine
        return inc[:count]


def _path(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    return np.concatenate((np.cumsum(left)[::-1], [0.0], np.cumsum(right)))


def two_sided_bm(grid: BmGrid, source: BmStream, base_step: Optional[float] = None) -> np.ndarray:
    """Standard two-sided Brownian motion on ``grid.points``; W(0) = 0 and
    the two arms are independent."""
    left = source.arm(0, grid.n_left, grid.step, base_step)
    right = source.arm(1, grid.n_right, grid.step, base_step)
    return _path(left, right)


@dataclass
class LimitSample:
    law: str
    params: dict
    values: np.ndarray
    grid: BmGrid
    reps: int
    seed: int
    base_step: float
    diagnostics: dict = field(default_factory=dict)

    def cdf(self, z) -> np.ndarray:
        return ecdf(self.values, z)

    def quantiles(self, ps: Sequence[float]) -> np.ndarray:
        return empirical_quantiles(self.values, ps)

    def provenance(self) -> dict:
        return {
            "law": self.law,
            "params": {k: float(v) for k, v in sorted(self.params.items())},
            "reps": int(self.reps),
            "step": float(self.grid.step),
            "window": [float(-self.grid.n_left * self.grid.step), float(self.grid.n_right * self.grid.step)],
            "base_step": float(self.base_step),
            "seed": int(self.seed),
        }


def ecdf(values: np.ndarray, z) -> np.ndarray:
    """Empirical distribution function of ``values`` at ``z``."""
    srt = np.sort(np.asarray(values, dtype=float))
    return np.searchsorted(srt, np.asarray(z, dtype=float), side="right") / srt.size


def empirical_quantiles(values: np.ndarray, ps: Sequence[float]) -> np.ndarray:
    """Type-1 (left-continuous inverse) empirical quantiles."""
    ps = np.asarray(ps, dtype=float)
    if np.any((ps <= 0) | (ps >= 1)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    srt = np.sort(np.asarray(values, dtype=float))
    idx = np.ceil(ps * srt.size - 1e-9).astype(int) - 1
    return srt[np.clip(idx, 0, srt.size - 1)]


def _check_reps(reps: int) -> None:
    if reps < 1:
        raise ValueError("reps must be at least 1")


# ---------------------------------------------------------------------------
# Chernoff
# ---------------------------------------------------------------------------

DEFAULT_CHERNOFF_GRID = BmGrid(1e-3, -2.5, 2.5)


def chernoff_sample(
    reps: int,
    grid: BmGrid = DEFAULT_CHERNOFF_GRID,
    seed: int = 0,
    base_step: Optional[float] = None,
    auto_widen: bool = True,
    threads: int = 1,
) -> LimitSample:
    """Draws of 2 argmin_s [W(s) + s^2] over a symmetric grid.

    Grid ties go to the smallest s.  If more than 1% of the argmins land on
    the window edge and ``auto_widen`` is set, the window is doubled and the
    sample redrawn (up to three times); the final hit fraction is kept in
    ``diagnostics``.
    """
    _check_reps(reps)
    base_step = grid.step if base_step is None else base_step
    law = tag("chernoff")
    for _ in range(4):
        step, nl, nr = grid.step, grid.n_left, grid.n_right

        def block(a, b, step=step, nl=nl, nr=nr):
            out = np.empty((b - a, 2))
            for r in range(a, b):
                src = BmStream(seed, law, r)
                k = kernels.chernoff_argmin(src.arm(0, nl, step, base_step), src.arm(1, nr, step, base_step), step)
                out[r - a, 0] = 2.0 * k * step
                out[r - a, 1] = k == -nl or k == nr
            return out

        res = map_reps(block, reps, threads)
        hit_fraction = float(res[:, 1].mean())
        if hit_fraction <= HIT_WARN or not auto_widen:
            break
        grid = grid.widened(2.0)
    flagged = hit_fraction > HIT_WARN
    if flagged:
        warnings.warn(f"chernoff: {hit_fraction:.2%} of argmins on the window edge", RuntimeWarning)
    return LimitSample(
        "chernoff", {}, res[:, 0], grid, reps, seed, base_step,
        {"edge_fraction": hit_fraction, "edge_warning": flagged},
    )


# ---------------------------------------------------------------------------
# boundary-corrected estimator
# ---------------------------------------------------------------------------


def default_boundary_grid(ell: float, phi1_prime: float, sigma: float, step: float = 1e-3) -> BmGrid:
    lower = -5.0 * max(1.0, sigma / phi1_prime) ** (2.0 / 3.0)
    return BmGrid(step, lower, ell)


def boundary_limit_sample(
    ell: float,
    phi1_prime: float,
    sigma: float,
    reps: int,
    grid: Optional[BmGrid] = None,
    seed: int = 0,
    base_step: Optional[float] = None,
    threads: int = 1,
) -> LimitSample:
    """Draws of [G_(-inf, ell](sigma W + phi'(1) s^2/2)]'(0) - ell phi'(1).

    The minorant is taken over ``[grid.lower, ell]``; how often the segment
    through 0 starts at the left edge is reported as ``left_edge_fraction``.
    """
    _check_reps(reps)
    if not (ell > 0 and phi1_prime > 0 and sigma > 0):
        raise ValueError("ell, phi'(1) and sigma must all be positive")
    if grid is None:
        grid = default_boundary_grid(ell, phi1_prime, sigma)
    if ell > grid.upper + 1e-12:
        raise ValueError(f"ell={ell} outside (0, {grid.upper}]")
    grid = BmGrid(grid.step, grid.lower, ell)
    base_step = grid.step if base_step is None else base_step
    law = tag("boundary")
    s = grid.points
    drift = 0.5 * phi1_prime * s * s
    nl, nr, step = grid.n_left, grid.n_right, grid.step

    def block(a, b):
        out = np.empty((b - a, 2))
        for r in range(a, b):
            src = BmStream(seed, law, r)
            w = _path(src.arm(0, nl, step, base_step), src.arm(1, nr, step, base_step))
            slope, start = kernels.gcm_slope_at(s, sigma * w + drift, nl)
            out[r - a, 0] = slope - ell * phi1_prime
            out[r - a, 1] = start == 0
        return out

    res = map_reps(block, reps, threads)
    edge = float(res[:, 1].mean())
    if edge > HIT_WARN:
        warnings.warn(f"boundary law: {edge:.2%} of minorant segments start at the left edge", RuntimeWarning)
    return LimitSample(
        "boundary", {"ell": ell, "phi1_prime": phi1_prime, "sigma": sigma},
        res[:, 0], grid, reps, seed, base_step,
        {"left_edge_fraction": edge, "edge_warning": edge > HIT_WARN},
    )


# ---------------------------------------------------------------------------
# penalized estimator
# ---------------------------------------------------------------------------


def default_penalized_grid(alpha: float, phi1: float, phi1_prime: float, sigma: float, step: float = 1e-3) -> BmGrid:
    return BmGrid(step, 0.0, 5.0 * (sigma + alpha * phi1) / phi1_prime)


def penalized_limit_sample(
    alpha: float,
    phi1: float,
    phi1_prime: float,
    sigma: float,
    reps: int,
    grid: Optional[BmGrid] = None,
    seed: int = 0,
    base_step: Optional[float] = None,
    threads: int = 1,
) -> LimitSample:
    """Draws of sup_{0<t<=T} [sigma W(t) - alpha phi(1) - phi'(1) t^2/2] / t.

    The supremum is taken over grid points t >= step.  Maximizers on the
    first or last grid point are counted in ``diagnostics``.
    """
    _check_reps(reps)
    if not (alpha > 0 and phi1 > 0 and phi1_prime > 0 and sigma > 0):
        raise ValueError("alpha, phi(1), phi'(1) and sigma must all be positive")
    if grid is None:
        grid = default_penalized_grid(alpha, phi1, phi1_prime, sigma)
    grid = BmGrid(grid.step, 0.0, grid.upper)
    base_step = grid.step if base_step is None else base_step
    law = tag("penalized")
    nr, step = grid.n_right, grid.step
    offset, half_curv = alpha * phi1, 0.5 * phi1_prime

    def block(a, b):
        out = np.empty((b - a, 3))
        for r in range(a, b):
            w = np.cumsum(BmStream(seed, law, r).arm(1, nr, step, base_step))
            val, k = kernels.penalized_sup(w, step, sigma, offset, half_curv)
            out[r - a] = val, k == 0, k == nr - 1
        return out

    res = map_reps(block, reps, threads)
    first, last = float(res[:, 1].mean()), float(res[:, 2].mean())
    flagged = max(first, last) > HIT_WARN
    if flagged:
        warnings.warn(f"penalized law: argmax on first/last grid point in {first:.2%}/{last:.2%} of reps", RuntimeWarning)
    return LimitSample(
        "penalized", {"alpha": alpha, "phi1": phi1, "phi1_prime": phi1_prime, "sigma": sigma},
        res[:, 0], grid, reps, seed, base_step,
        {"first_point_fraction": first, "last_point_fraction": last, "edge_warning": flagged},
    )


# ---------------------------------------------------------------------------
# quantile tables and their cache
# ---------------------------------------------------------------------------


@dataclass
class QuantileTable:
    """Empirical quantiles of a limit law with the provenance that produced them.

    ``cdf`` optionally carries distribution-function values at z probes.
    """

    probabilities: list
    quantiles: list
    provenance: dict
    cdf: dict = field(default_factory=dict)

    def quantile(self, p: float) -> float:
        for pp, q in zip(self.probabilities, self.quantiles):
            if math.isclose(pp, p, rel_tol=0, abs_tol=1e-12):
                return q
        raise KeyError(f"p={p} not in table")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "QuantileTable":
        return cls(**json.loads(text))

    @classmethod
    def from_sample(cls, sample: LimitSample, ps: Sequence[float], z: Optional[Sequence[float]] = None):
        ps = list(map(float, ps))
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("probabilities must be strictly increasing")
        qs = sample.quantiles(ps).tolist()
        cdf = {}
        if z is not None:
            cdf = {f"{zz:g}": float(v) for zz, v in zip(z, sample.cdf(z))}
        prov = sample.provenance()
        prov["diagnostics"] = {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in sample.diagnostics.items()}
        return cls(ps, qs, prov, cdf)


def chernoff_quantiles(
    ps: Sequence[float] = TABLE_PS,
    reps: int = 100_000,
    grid: BmGrid = DEFAULT_CHERNOFF_GRID,
    seed: int = 0,
    threads: int = 1,
) -> QuantileTable:
    return QuantileTable.from_sample(chernoff_sample(reps, grid, seed, threads=threads), ps)


def default_cache_dir() -> Path:
    env = os.environ.get("MONOTREND_CACHE")
    return Path(env) if env else Path.home() / ".cache" / "monotrend"


def cache_key(request: dict) -> str:
    blob = json.dumps(request, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def cached_table(request: dict, compute, cache_dir: Optional[Path] = None, fresh: bool = False):
    """Return ``(table, hit)``; ``compute()`` runs only on a miss or ``fresh``."""
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache_dir / f"{request.get('law', 'table')}-{cache_key(request)}.json"
    if path.exists() and not fresh:
        return QuantileTable.from_json(path.read_text(encoding="utf-8")), True
    table = compute()
    table.provenance["request"] = request
    cache_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(table.to_json(), encoding="utf-8")
    return table, False


def cached_chernoff_quantiles(
    ps: Sequence[float] = TABLE_PS,
    reps: int = 100_000,
    grid: BmGrid = DEFAULT_CHERNOFF_GRID,
    seed: int = 0,
    cache_dir: Optional[Path] = None,
    fresh: bool = False,
    threads: int = 1,
):
    request = {
        "law": "chernoff", "ps": [float(p) for p in ps], "reps": int(reps),
        "step": grid.step, "window": [grid.lower, grid.upper], "seed": int(seed),
    }
    return cached_table(request, lambda: chernoff_quantiles(ps, reps, grid, seed, threads), cache_dir, fresh)
