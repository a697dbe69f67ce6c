"""Command-line front end: ``monotrend {fit,acf,simulate,limits,tables}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from monotrend import __version__, harness, limits
from monotrend.estimators import BoundarySpec, PenaltySpec, boundary_corrected_last, isotonic_trend, penalized_last
from monotrend.stochastic import Ar1Spec, TrendFunction, acf, synthesize

log = logging.getLogger("monotrend")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3


class InvariantViolation(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_series(path: Path, column: Optional[str] = None) -> tuple[list, np.ndarray]:
    """Read ``(labels, values)`` from a CSV file.

    Lines starting with ``#`` are skipped.  A first row whose selected cell
    is not numeric is taken as a header.  ``column`` is a header name or a
    0-based index; the last column is used by default.  Labels come from the
    first column when there is more than one, else from the row position.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0][1])
    header = None
    probe = rows[0][1][-1] if column is None or not str(column).lstrip("-").isdigit() else rows[0][1][int(column)]
    if not _is_number(probe.strip()):
        header = [h.strip() for h in rows[0][1]]
        rows = rows[1:]
    if column is None:
        col = width - 1
    elif str(column).lstrip("-").isdigit():
        col = int(column)
    elif header is not None and column in header:
        col = header.index(column)
    else:
        raise ValueError(f"{path}: no column {column!r}")
    labels, values = [], []
    for lineno, row in rows:
        try:
            cell = row[col].strip()
            values.append(float(cell))
        except (IndexError, ValueError):
            raise ValueError(f"{path}: row {lineno}: non-numeric or missing value in column {col}") from None
        labels.append(row[0].strip() if width > 1 else str(len(labels) + 1))
    if not values:
        raise ValueError(f"{path}: no data rows")
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{path}: non-finite value")
    return labels, np.asarray(values)


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _header(command: str, seed, config: dict) -> str:
    return f"# monotrend {__version__} command={command} seed={seed} config_hash={_digest(config)}\n"


def _provenance(command: str, seed, config: dict) -> dict:
    return {"tool": "monotrend", "version": __version__, "command": command, "seed": seed,
            "config": config, "config_hash": _digest(config)}


def _write_csv(path: Path, header: str, columns: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    labels, y = read_series(Path(args.input), args.column)
    n = y.size
    fit = isotonic_trend(y)
    if np.any(np.diff(fit.mu_tilde) < 0):
        raise InvariantViolation("isotonic fit is not nondecreasing")
    pen = PenaltySpec(alpha=args.alpha, lam=args.lam)
    bnd = BoundarySpec(ell=args.ell, m=args.m)
    mu_p, i_p = penalized_last(y, pen, return_index=True)
    mu_b = boundary_corrected_last(y, bnd)
    resid = y - fit.mu_tilde
    max_lag = args.max_lag if args.max_lag is not None else n // 4
    try:
        ac = acf(resid, max_lag)
        acf_rows = list(zip(ac.lags.tolist(), ac.autocorrelations.tolist()))
    except ValueError as exc:
        log.warning("residual ACF skipped: %s", exc)
        acf_rows = []
    config = {"input": str(args.input), "column": args.column, "alpha": args.alpha, "lam": args.lam,
              "ell": args.ell, "m": args.m, "max_lag": max_lag}
    head = _header("fit", None, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t, level = fit.step_coordinates()
    _write_csv(out / "steps.csv", head, ["t", "level"], zip(t.tolist(), level.tolist()))
    summary = {
        "provenance": _provenance("fit", None, config),
        "n": n,
        "penalized_last": mu_p,
        "penalized_start": i_p,
        "lambda": pen.resolve(n),
        "boundary_corrected_last": mu_b,
        "m": bnd.resolve(n),
        "isotonic_last": float(fit.mu_tilde[-1]),
        "knots": fit.knots.tolist(),
        "levels": fit.levels().tolist(),
    }
    fit_rows = list(zip(labels, y.tolist(), fit.mu_tilde.tolist(), resid.tolist()))
    if args.format == "json":
        summary["fit"] = [dict(zip(("label", "value", "fit", "residual"), r)) for r in fit_rows]
        summary["acf"] = [{"lag": k, "acf": r} for k, r in acf_rows]
        _write_json(out / "fit.json", summary)
    else:
        _write_csv(out / "fit.csv", head, ["label", "value", "fit", "residual"], fit_rows)
        _write_csv(out / "acf.csv", head, ["lag", "acf"], acf_rows)
        _write_json(out / "summary.json", summary)
    print(f"fit n={n}: {len(fit.knots) - 1} level sets; mu_tilde_n={fit.mu_tilde[-1]:.6g} "
          f"penalized={mu_p:.6g} boundary={mu_b:.6g} -> {out}")
    return EXIT_OK


def cmd_acf(args) -> int:
    _, y = read_series(Path(args.input), args.column)
    series = y - isotonic_trend(y).mu_tilde if args.residuals else y
    max_lag = args.max_lag if args.max_lag is not None else y.size // 4
    ac = acf(series, max_lag)
    config = {"input": str(args.input), "column": args.column, "residuals": args.residuals, "max_lag": max_lag}
    rows = zip(ac.lags.tolist(), ac.autocorrelations.tolist())
    if args.out:
        _write_csv(Path(args.out), _header("acf", None, config), ["lag", "acf"], rows)
    else:
        sys.stdout.write(_header("acf", None, config) + "lag,acf\n")
        for k, r in rows:
            sys.stdout.write(f"{k},{r!r}\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = Ar1Spec(args.rho, args.sd, args.seed, args.burn_in)
    phi = TrendFunction.from_name(args.phi)
    ts = synthesize(args.n, phi, spec)
    config = {"n": args.n, "rho": args.rho, "sd": args.sd, "phi": args.phi, "burn_in": args.burn_in}
    rows = zip(range(1, args.n + 1), ts.trend.tolist(), ts.values.tolist())
    _write_csv(Path(args.out), _header("simulate", args.seed, config), ["label", "trend", "value"], rows)
    print(f"wrote {args.n} observations to {args.out}")
    return EXIT_OK


def _limit_request(args) -> dict:
    req = {"law": args.law, "ps": [float(p) for p in args.ps], "reps": args.reps, "step": args.step,
           "seed": args.seed}
    if args.law == "chernoff":
        req["window"] = [-args.window, args.window]
    elif args.law == "boundary":
        _require(args, "ell", "sigma", "phi1_prime")
        req.update(ell=args.ell, sigma=args.sigma, phi1_prime=args.phi1_prime, lower=args.lower)
    else:
        _require(args, "alpha", "sigma", "phi1_prime")
        req.update(alpha=args.alpha, phi1=args.phi1, sigma=args.sigma, phi1_prime=args.phi1_prime, upper=args.upper)
    return req


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise harness.ConfigError(name.replace("_", "-"), "required for this law")


def cmd_limits(args) -> int:
    req = _limit_request(args)
    z = list(limits.TABLE_Z)

    def compute():
        if args.law == "chernoff":
            grid = limits.BmGrid(args.step, -args.window, args.window)
            sample = limits.chernoff_sample(args.reps, grid, args.seed, threads=args.threads)
            return limits.QuantileTable.from_sample(sample, args.ps)
        if args.law == "boundary":
            grid = limits.default_boundary_grid(args.ell, args.phi1_prime, args.sigma, args.step)
            if args.lower is not None:
                grid = limits.BmGrid(args.step, args.lower, args.ell)
            sample = limits.boundary_limit_sample(args.ell, args.phi1_prime, args.sigma, args.reps, grid,
                                                  args.seed, threads=args.threads)
        else:
            grid = limits.default_penalized_grid(args.alpha, args.phi1, args.phi1_prime, args.sigma, args.step)
            if args.upper is not None:
                grid = limits.BmGrid(args.step, 0.0, args.upper)
            sample = limits.penalized_limit_sample(args.alpha, args.phi1, args.phi1_prime, args.sigma, args.reps,
                                                   grid, args.seed, threads=args.threads)
        return limits.QuantileTable.from_sample(sample, args.ps, z)

    table, hit = limits.cached_table(req, compute, args.cache_dir, args.fresh)
    text = table.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    print(f"{args.law}: {'cache hit' if hit else 'computed'} (key {limits.cache_key(req)})", file=sys.stderr)
    return EXIT_OK


def _tables_config(args) -> harness.ExperimentConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise harness.ConfigError("config", f"not valid JSON ({exc})") from None
    overrides = {
        "n": args.n, "reps": args.reps, "seed": args.seed, "alpha": args.alpha, "alpha_star": args.alpha_star,
        "lam": args.lam, "ell": args.ell, "ell_star": args.ell_star, "m": args.m, "limit_reps": args.limit_reps,
        "kappa_slope": args.kappa_slope, "threads": args.threads, "marginal_sd": args.sd,
        "rhos": tuple(args.rho) if args.rho else None, "phis": tuple(args.phi) if args.phi else None,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    return harness.ExperimentConfig.from_dict(base)


def cmd_tables(args) -> int:
    cfg = _tables_config(args).for_kind(args.which)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.which == "interior":
        qt, hit = limits.cached_chernoff_quantiles(cfg.ps, args.quantile_reps, seed=args.quantile_seed,
                                                   cache_dir=args.cache_dir, threads=cfg.threads)
        log.info("chernoff quantiles: %s", "cache hit" if hit else "computed")
        report = harness.run_interior(cfg, qt)
        written = []
        for phi in cfg.phis:
            path = out / f"interior-{phi}.csv"
            path.write_text(report.to_csv(phi=phi), encoding="utf-8")
            written.append(path)
    else:
        report = harness.run_boundary(cfg) if args.which == "boundary" else harness.run_penalized(cfg)
        written = []
        for axis in ("raw", "normalized"):
            path = out / f"{args.which}-{axis}.csv"
            path.write_text(report.to_csv(axis=axis), encoding="utf-8")
            written.append(path)
    for col in report.columns:
        v = np.asarray(col.values)
        if np.any((v < 0) | (v > 1)) or np.any(np.diff(v) < 0):
            raise InvariantViolation(f"column {col.label} is not a distribution function")
    path = out / f"{args.which}.json"
    path.write_text(report.to_json() + "\n", encoding="utf-8")
    written.append(path)
    for p in written:
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monotrend", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"monotrend {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="isotonic trend, endpoint estimators and residual ACF of a CSV series")
    p.add_argument("input")
    p.add_argument("--column", default=None, help="value column (name or 0-based index; default last)")
    p.add_argument("--alpha", type=float, default=1.0, help="penalty rate: lambda = alpha n^(1/3)")
    p.add_argument("--lam", type=float, default=None, help="explicit lambda (overrides --alpha)")
    p.add_argument("--ell", type=float, default=1.0, help="boundary offset: m = n - ceil(ell n^(1/3))")
    p.add_argument("--m", type=int, default=None, help="explicit boundary index (overrides --ell)")
    p.add_argument("--max-lag", type=int, default=None, help="residual ACF lags (default n//4)")
    p.add_argument("--out-dir", default="fit-out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("acf", help="sample autocorrelations of a series or of its isotonic residuals")
    p.add_argument("input")
    p.add_argument("--column", default=None)
    p.add_argument("--max-lag", type=int, default=None)
    p.add_argument("--residuals", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_acf)

    p = sub.add_parser("simulate", help="synthetic trend plus stationary AR(1) series")
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--sd", type=float, default=0.25, help="marginal sd of the errors")
    p.add_argument("--phi", choices=("sqrt", "identity", "square"), default="identity")
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("limits", help="Monte Carlo quantile table of a limit law (cached)")
    p.add_argument("law", choices=("chernoff", "boundary", "penalized"))
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ps", type=float, nargs="+", default=list(limits.TABLE_PS))
    p.add_argument("--window", type=float, default=2.5, help="chernoff: half-width of the grid")
    p.add_argument("--ell", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--phi1-prime", type=float)
    p.add_argument("--phi1", type=float, default=1.0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--lower", type=float, default=None, help="boundary: left end of the grid")
    p.add_argument("--upper", type=float, default=None, help="penalized: right end of the grid")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--fresh", action="store_true", help="ignore and overwrite the cache")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("tables", help="replicate the interior / boundary / penalized tables")
    p.add_argument("--which", choices=("interior", "boundary", "penalized"), required=True)
    p.add_argument("--config", default=None, help="JSON file with ExperimentConfig fields")
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sd", type=float)
    p.add_argument("--rho", type=float, action="append")
    p.add_argument("--phi", choices=("sqrt", "identity", "square"), action="append")
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha-star", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--ell", type=float)
    p.add_argument("--ell-star", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--limit-reps", type=int)
    p.add_argument("--kappa-slope", choices=("derivative", "2t"))
    p.add_argument("--quantile-reps", type=int, default=100_000)
    p.add_argument("--quantile-seed", type=int, default=0)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--threads", type=int)
    p.add_argument("--out-dir", default="tables-out")
    p.set_defaults(func=cmd_tables)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
