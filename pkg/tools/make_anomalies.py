"""Regenerate src/monotrend/data/anomalies_like.csv (synthetic, seed 1850)."""

from pathlib import Path

from monotrend.stochastic import Ar1Spec, stream, synthesize, TrendFunction

n = 151
phi = TrendFunction.custom(lambda t: -0.35 + 0.8 * t**2)
ts = synthesize(n, phi, Ar1Spec(0.5, 0.12), rng=stream(1850))
out = Path(__file__).resolve().parents[1] / "src/monotrend/data/anomalies_like.csv"
with open(out, "w") as fh:
    fh.write("# synthetic annual anomaly-like series: quadratic trend plus AR(1) noise, seed 1850\n")
    fh.write("year,anomaly\n")
    for year, v in zip(range(1850, 1850 + n), ts.values):
        fh.write(f"{year},{v:.4f}\n")
