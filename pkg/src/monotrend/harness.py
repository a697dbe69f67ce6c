"""Replication engine: empirical distribution of normalized estimation errors.

Three experiments are supported:

``interior``
    n^(1/3)[mu_tilde(t0) - phi(t0)] / kappa at interior points, tabulated at
    Chernoff percentiles (one table per trend, both rho values side by side,
    plus min/max over a sweep of t0).
``boundary``
    n^(1/3)[mu_tilde(m_n) - phi(1)] tabulated at z probes next to the
    boundary limit law.
``penalized``
    n^(1/3)[mu_hat_p - phi(1)] tabulated at z probes next to the penalized
    limit law.

Boundary and penalized results are reported on two axes: ``raw`` (the
n^(1/3) error itself) and ``normalized`` (divided by kappa at t = 1).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from monotrend import __version__, kernels
from monotrend.estimators import BoundarySpec, PenaltySpec, kappa, penalized_last, snap_index
from monotrend.isotonic import isotonic_slopes
from monotrend.limits import (
    TABLE_PS,
    TABLE_Z,
    QuantileTable,
    boundary_limit_sample,
    default_boundary_grid,
    default_penalized_grid,
    ecdf,
    penalized_limit_sample,
)
from monotrend.parallel import map_reps
from monotrend.stochastic import Ar1Spec, TrendFunction, long_run_variance_ar1, stream, synthesize, tag


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


DEFAULT_RHOS = {"interior": (0.5, 0.9), "boundary": (0.0, 0.5, 0.9), "penalized": (0.0, 0.5, 0.9)}
DEFAULT_PHIS = {"interior": ("square", "identity", "sqrt"), "boundary": ("sqrt", "identity", "square"),
                "penalized": ("sqrt", "identity", "square")}


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one replication run.

    ``alpha``/``lam`` (penalized) and ``ell``/``m`` (boundary) follow
    :class:`PenaltySpec` and :class:`BoundarySpec`.  ``alpha_star`` and
    ``ell_star`` instead fix the smoothing parameter in the units of the
    kappa-normalized limit, so alpha or ell is chosen per (rho, phi) cell.

    ``kappa_slope`` picks the slope inside the interior scale kappa:
    ``"derivative"`` uses phi'(t0); ``"2t"`` uses 2 t0 for every trend, which
    is only correct for phi(t) = t^2 and exists to compare against tables
    that were computed that way.
    """

    n: int = 150
    reps: int = 2000
    rhos: Optional[tuple] = None
    phis: Optional[tuple] = None
    t0s: tuple = (1 / 3, 1 / 2, 2 / 3)
    marginal_sd: float = 0.25
    seed: int = 0
    ps: tuple = TABLE_PS
    z: tuple = TABLE_Z
    sweep: int = 11
    alpha: Optional[float] = None
    alpha_star: Optional[float] = None
    lam: Optional[float] = None
    ell: Optional[float] = None
    ell_star: Optional[float] = None
    m: Optional[int] = None
    limit_reps: int = 2000
    limit_step: float = 1e-3
    kappa_slope: str = "derivative"
    threads: int = 1

    def for_kind(self, kind: str) -> "ExperimentConfig":
        """Fill kind-specific defaults and validate."""
        if kind not in DEFAULT_RHOS:
            raise ConfigError("which", f"unknown experiment {kind!r}")
        cfg = replace(
            self,
            rhos=tuple(self.rhos) if self.rhos is not None else DEFAULT_RHOS[kind],
            phis=tuple(self.phis) if self.phis is not None else DEFAULT_PHIS[kind],
        )
        cfg.validate(kind)
        return cfg

    def validate(self, kind: str) -> None:
        if self.n < 2:
            raise ConfigError("n", "must be at least 2")
        if self.reps < 1:
            raise ConfigError("reps", "must be at least 1")
        if not self.marginal_sd > 0:
            raise ConfigError("marginal_sd", "must be positive")
        for rho in self.rhos or ():
            if not -1 < rho < 1:
                raise ConfigError("rhos", f"{rho} outside (-1, 1)")
        for name in self.phis or ():
            if name not in ("sqrt", "identity", "square"):
                raise ConfigError("phis", f"unknown trend {name!r}")
        if kind == "interior":
            for t in self.t0s:
                if not 0 < t < 1:
                    raise ConfigError("t0s", f"{t} outside (0, 1)")
                if snap_index(self.n, t) < 1:
                    raise ConfigError("t0s", f"{t} snaps to index 0 for n={self.n}")
            if self.sweep < 2:
                raise ConfigError("sweep", "needs at least 2 points")
            if any(not 0 < p < 1 for p in self.ps):
                raise ConfigError("ps", "probabilities must lie in (0, 1)")
            if self.kappa_slope not in ("derivative", "2t"):
                raise ConfigError("kappa_slope", "must be 'derivative' or '2t'")
        elif kind == "penalized":
            given = [k for k in ("alpha", "alpha_star", "lam") if getattr(self, k) is not None]
            if len(given) != 1:
                raise ConfigError("alpha", "exactly one of alpha, alpha_star, lam is required")
            if self.alpha is not None and not self.alpha > 0:
                raise ConfigError("alpha", "must be positive")
            if self.alpha_star is not None and not self.alpha_star > 0:
                raise ConfigError("alpha_star", "must be positive")
            if self.lam is not None and not self.lam >= 0:
                raise ConfigError("lam", "must be nonnegative")
        elif kind == "boundary":
            given = [k for k in ("ell", "ell_star", "m") if getattr(self, k) is not None]
            if len(given) != 1:
                raise ConfigError("ell", "exactly one of ell, ell_star, m is required")
            if self.ell is not None and not self.ell > 0:
                raise ConfigError("ell", "must be positive")
            if self.ell_star is not None and not self.ell_star > 0:
                raise ConfigError("ell_star", "must be positive")
            if self.m is not None and not 1 <= self.m <= self.n:
                raise ConfigError("m", f"must lie in [1, {self.n}]")
        if self.limit_reps < 1:
            raise ConfigError("limit_reps", "must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**kw)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def standard_error(p: float, reps: int) -> float:
    """sqrt(p (1 - p) / reps)."""
    if not 0 < p < 1:
        raise ValueError(f"p={p} outside (0, 1)")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    return math.sqrt(p * (1.0 - p) / reps)


def natural_scale(sigma: float, phi_prime: float) -> float:
    """Time scale c = (2 sigma / phi')^(2/3) that maps sigma W + phi' s^2/2 onto W + u^2."""
    return (2.0 * sigma / phi_prime) ** (2.0 / 3.0)


def normalized_penalty(alpha: float, phi1: float, phi1_prime: float, sigma: float) -> float:
    """alpha' for which the kappa-normalized penalized law is sup_u (W(u) - alpha' - u^2)/u."""
    return alpha * phi1 / (sigma * math.sqrt(natural_scale(sigma, phi1_prime)))


def _fmt(x: float) -> str:
    return f"{x:.6g}"


@dataclass
class Column:
    rho: float
    phi: str
    key: str
    axis: str
    values: list

    @property
    def label(self) -> str:
        return f"phi={self.phi} rho={_fmt(self.rho)} {self.key}" + ("" if self.axis == "raw" else f" [{self.axis}]")


@dataclass
class ReplicationReport:
    kind: str
    probe_name: str
    probes: list
    se: list
    columns: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def cell(self, rho: float, phi: str, key: str, probe: float, axis: str = "raw") -> float:
        i = _probe_index(self.probes, probe)
        for c in self.columns:
            if math.isclose(c.rho, rho, abs_tol=1e-12) and c.phi == phi and c.key == key and c.axis == axis:
                return c.values[i]
        raise KeyError((rho, phi, key, axis))

    def column(self, rho: float, phi: str, key: str, axis: str = "raw") -> np.ndarray:
        for c in self.columns:
            if math.isclose(c.rho, rho, abs_tol=1e-12) and c.phi == phi and c.key == key and c.axis == axis:
                return np.asarray(c.values)
        raise KeyError((rho, phi, key, axis))

    def header_lines(self) -> list[str]:
        prov = self.provenance
        return [
            f"# monotrend {prov.get('version', __version__)} kind={self.kind} "
            f"seed={prov.get('seed')} config_hash={prov.get('config_hash')}",
        ]

    def to_csv(self, phi: Optional[str] = None, axis: Optional[str] = None) -> str:
        """One row per probe, one column per cell; optionally one trend / axis only."""
        cols = [c for c in self.columns if (phi is None or c.phi == phi) and (axis is None or c.axis == axis)]
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.probe_name, "se"] + [c.label for c in cols])
        for i, probe in enumerate(self.probes):
            w.writerow([_fmt(probe), f"{self.se[i]:.4f}"] + [f"{c.values[i]:.4f}" for c in cols])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "probe_name": self.probe_name,
                "probes": self.probes,
                "se": self.se,
                "columns": [asdict(c) for c in self.columns],
                "provenance": self.provenance,
            },
            sort_keys=True,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ReplicationReport":
        d = json.loads(text)
        d["columns"] = [Column(**c) for c in d["columns"]]
        return cls(**d)


def _probe_index(probes: Sequence[float], probe: float) -> int:
    for i, p in enumerate(probes):
        if math.isclose(p, probe, abs_tol=1e-9):
            return i
    raise KeyError(f"probe {probe} not in report")


def _provenance(cfg: ExperimentConfig, kind: str, **extra) -> dict:
    return {
        "version": __version__,
        "kind": kind,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "stream_keys": "cell=(rho, phi) -> crc32 tag; replication r -> SeedSequence([seed, tag, r])",
        "backend": kernels.BACKEND,
        **extra,
    }


def _series_block(cfg: ExperimentConfig, rho: float, phi: TrendFunction, fn, width: int):
    """Replication-block function running ``fn(series)`` on each synthetic series."""
    spec = Ar1Spec(rho, cfg.marginal_sd)
    cell = tag(float(rho), phi.name)

    def block(a, b):
        out = np.empty((b - a, width))
        for r in range(a, b):
            ts = synthesize(cfg.n, phi, spec, stream(cfg.seed, cell, r))
            out[r - a] = fn(ts.values)
        return out

    return block


def sweep_indices(cfg: ExperimentConfig) -> np.ndarray:
    """Sorted distinct k = floor(n t) for ``cfg.sweep`` points of [1/3, 2/3]."""
    ts = np.linspace(1 / 3, 2 / 3, cfg.sweep)
    return np.unique([snap_index(cfg.n, t) for t in ts])


def interior_errors(cfg: ExperimentConfig, rho: float, phi_name: str, ks: Sequence[int]) -> np.ndarray:
    """reps x len(ks) array of kappa-scaled errors at the indices ``ks``."""
    phi = TrendFunction.from_name(phi_name)
    sigma = math.sqrt(long_run_variance_ar1(Ar1Spec(rho, cfg.marginal_sd)))
    ks = np.asarray(ks, dtype=int)
    t = ks / cfg.n
    slopes = 2.0 * t if cfg.kappa_slope == "2t" else np.asarray(phi.prime(t), dtype=float)
    scale = cfg.n ** (1.0 / 3.0) / np.array([kappa(sigma, float(d)) for d in slopes])
    target = np.asarray(phi(t), dtype=float)

    def errors(y):
        mu, _ = isotonic_slopes(y)
        return (mu[ks - 1] - target) * scale

    return map_reps(_series_block(cfg, rho, phi, errors, ks.size), cfg.reps, cfg.threads)


def run_interior(cfg: ExperimentConfig, quantiles: Optional[QuantileTable]) -> ReplicationReport:
    """Empirical CDF of Xi_n / kappa at Chernoff percentiles.

    Every cell reuses one set of series per replication for the fixed t0
    columns and the min/max sweep.
    """
    cfg = cfg.for_kind("interior")
    if quantiles is None:
        raise ConfigError("quantiles", "a Chernoff quantile table is required")
    probes_z = np.array([quantiles.quantile(p) for p in cfg.ps])
    fixed = [snap_index(cfg.n, t) for t in cfg.t0s]
    swept = sweep_indices(cfg).tolist()
    ks = fixed + swept
    report = ReplicationReport(
        "interior", "p", [float(p) for p in cfg.ps], [standard_error(p, cfg.reps) for p in cfg.ps],
        provenance=_provenance(
            cfg, "interior",
            chernoff_quantiles=[float(q) for q in probes_z],
            chernoff_provenance=quantiles.provenance,
            t0_indices=fixed, sweep_indices=swept,
        ),
    )
    for phi in cfg.phis:
        for rho in cfg.rhos:
            err = interior_errors(cfg, rho, phi, ks)
            cdfs = np.array([ecdf(err[:, j], probes_z) for j in range(len(ks))])
            for j, t in enumerate(cfg.t0s):
                report.columns.append(Column(rho, phi, f"t0={_t0_label(t)}", "raw", cdfs[j].tolist()))
            sweep_cdfs = cdfs[len(fixed):]
            report.columns.append(Column(rho, phi, "min", "raw", sweep_cdfs.min(axis=0).tolist()))
            report.columns.append(Column(rho, phi, "max", "raw", sweep_cdfs.max(axis=0).tolist()))
    return report


def _t0_label(t: float) -> str:
    for den in (2, 3, 4, 5, 6, 8, 10):
        num = round(t * den)
        if math.isclose(num / den, t, abs_tol=1e-12):
            return f"{num}/{den}"
    return _fmt(t)


def _endpoint_report(cfg: ExperimentConfig, kind: str, stat, limit_for) -> ReplicationReport:
    z = np.asarray(cfg.z, dtype=float)
    report = ReplicationReport(kind, "z", z.tolist(), [], provenance=_provenance(cfg, kind, cells={}))
    se_worst = 0.0
    for phi_name in cfg.phis:
        phi = TrendFunction.from_name(phi_name)
        phi1, phi1p = float(phi(1.0)), float(phi.prime(1.0))
        for rho in cfg.rhos:
            sigma = math.sqrt(long_run_variance_ar1(Ar1Spec(rho, cfg.marginal_sd)))
            k1 = kappa(sigma, phi1p)
            cell_info, fn = stat(phi, sigma)
            err = map_reps(_series_block(cfg, rho, phi, fn, 1), cfg.reps, cfg.threads)[:, 0]
            emp = ecdf(err, z)
            se_worst = max(se_worst, float(np.max(np.sqrt(emp * (1 - emp) / cfg.reps))))
            report.columns.append(Column(rho, phi_name, f"n={cfg.n}", "raw", emp.tolist()))
            report.columns.append(Column(rho, phi_name, f"n={cfg.n}", "normalized", ecdf(err / k1, z).tolist()))
            sample = limit_for(cell_info, phi1, phi1p, sigma, tag(float(rho), phi_name, kind))
            if sample is not None:
                report.columns.append(Column(rho, phi_name, "n=inf", "raw", sample.cdf(z).tolist()))
                report.columns.append(Column(rho, phi_name, "n=inf", "normalized", sample.cdf(z * k1).tolist()))
                cell_info["limit_diagnostics"] = {k: float(v) for k, v in sample.diagnostics.items()}
            cell_info.update(sigma=sigma, kappa=k1)
            report.provenance["cells"][f"phi={phi_name} rho={_fmt(rho)}"] = cell_info
    report.se = [se_worst] * len(z)
    return report


def run_boundary(cfg: ExperimentConfig) -> ReplicationReport:
    """n^(1/3)(mu_tilde_{m_n} - phi(1)) against the boundary limit law."""
    cfg = cfg.for_kind("boundary")
    n = cfg.n
    root = n ** (1.0 / 3.0)

    def stat(phi, sigma):
        if cfg.ell_star is not None:
            spec = BoundarySpec(ell=cfg.ell_star * natural_scale(sigma, float(phi.prime(1.0))))
        else:
            spec = BoundarySpec(ell=cfg.ell if cfg.ell is not None else 1.0, m=cfg.m)
        m = spec.resolve(n)
        target = float(phi(1.0))

        def fn(y):
            mu, _ = isotonic_slopes(y)
            return root * (mu[m - 1] - target)

        ell = spec.ell if spec.m is None else (n - m) / root
        return {"m": m, "ell": ell, "ell_effective": (n - m) / root}, fn

    def limit_for(info, phi1, phi1p, sigma, key):
        if info["m"] == n:
            return None
        return boundary_limit_sample(info["ell"], phi1p, sigma, cfg.limit_reps, seed=cfg.seed + key,
                                     grid=default_boundary_grid(info["ell"], phi1p, sigma, cfg.limit_step),
                                     threads=cfg.threads)

    return _endpoint_report(cfg, "boundary", stat, limit_for)


def run_penalized(cfg: ExperimentConfig) -> ReplicationReport:
    """n^(1/3)(mu_hat_p - phi(1)) against the penalized limit law."""
    cfg = cfg.for_kind("penalized")
    n = cfg.n
    root = n ** (1.0 / 3.0)

    def stat(phi, sigma):
        phi1, phi1p = float(phi(1.0)), float(phi.prime(1.0))
        if cfg.alpha_star is not None:
            alpha = cfg.alpha_star * sigma * math.sqrt(natural_scale(sigma, phi1p)) / phi1
            lam = alpha * root
        elif cfg.alpha is not None:
            alpha, lam = cfg.alpha, cfg.alpha * root
        else:
            lam = float(cfg.lam)
            alpha = lam / root
        spec = PenaltySpec(lam=lam)

        def fn(y):
            return root * (penalized_last(y, spec) - phi1)

        info = {"alpha": alpha, "lambda": lam}
        if alpha > 0:
            info["alpha_normalized"] = normalized_penalty(alpha, phi1, phi1p, sigma)
        return info, fn

    def limit_for(info, phi1, phi1p, sigma, key):
        if not info["alpha"] > 0:
            return None
        return penalized_limit_sample(info["alpha"], phi1, phi1p, sigma, cfg.limit_reps, seed=cfg.seed + key,
                                      grid=default_penalized_grid(info["alpha"], phi1, phi1p, sigma, cfg.limit_step),
                                      threads=cfg.threads)

    return _endpoint_report(cfg, "penalized", stat, limit_for)
