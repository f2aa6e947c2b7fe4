"""MSE against the number of measurements, with an SVG figure.

Writes results.csv, report.json and mse_vs_T.svg to ./demo_consistency.
The consistent estimators fall like 1/m; S-LS levels off at its bias.
"""

from rangeloc.analysis import loglog_slope
from rangeloc.harness import TrialConfig, run_trial, save_report
from rangeloc.model import reference_scenario
from rangeloc.svgplot import emit_svg

names = ("S-LS", "BiasEli", "BiasEliLin", "NoiseEst", "TwoStep(BiasEli)")
cfg = TrialConfig("consistency", reference_scenario(1.0), names, (1, 10, 100, 1000), (1.0,), 100, seed=3)
report = run_trial(cfg)
out = save_report(report, "demo_consistency")
emit_svg(report, "mse_vs_T", out / "mse_vs_T.svg")

for name in names:
    cells = [report.cell(name, T) for T in cfg.repeats]
    mse = "  ".join(f"{c.stats.mse:9.2e}" for c in cells)
    slope = loglog_slope([c.m for c in cells[1:]], [c.stats.mse for c in cells[1:]])
    print(f"{name:18s} {mse}   slope {slope:5.2f}")
print(f"{'CRLB':18s} " + "  ".join(f"{report.cell(names[0], T).crlb:9.2e}" for T in cfg.repeats))
print(f"\nwrote {out}/")
