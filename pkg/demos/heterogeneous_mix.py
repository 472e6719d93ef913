"""Heterogeneous fusion: two PHD filters, one MB, one LMB, shared scenario.

The four filters keep their own posterior families; fusion only aligns
their unlabeled PHDs (weights) and target counts.  Prints the per-filter
OSPA with and without cooperation and writes the CSVs that the report tool
consumes, e.g.

    report --in demos/out_heterogeneous --figures ospa_time,ospa_vs_t --out figs
"""

import os

from rfsfuse.fusion import uniform_config
from rfsfuse.harness import ExperimentConfig, run_experiment, write_diagnostics, write_results
from rfsfuse.scenario import default_scenario

scenario = default_scenario(sensor_kind="linear", seed=99, runs=3)
config = ExperimentConfig(
    scenario=scenario,
    filter_assignment=("phd", "phd", "mb", "lmb"),
    fusion=uniform_config(4, alpha1=0.2, beta=0.6),
    mode="fit",
    fit_iteration_sweep=(1, 2, 3),
)

print("running 3 runs x (noncooperative, cc_only, fit t=1..3)...")
table = run_experiment(config)
out_dir = os.path.join(os.path.dirname(__file__), "out_heterogeneous")
write_results(table, out_dir)
write_diagnostics(table, out_dir)
print(f"wrote CSVs to {out_dir}")

print("\nmean OSPA per sensor (rows: cooperation level):")
header = "  ".join(f"s{r[2]}:{r[3]:>4s}" for r in table.aggregate[:4])
print(f"{'':18s}{header}")
for mode, t in [("noncooperative", 0), ("cc_only", 0), ("fit", 3)]:
    rows = [r for r in table.aggregate if r[0] == mode and r[1] == t]
    cells = "  ".join(f"{r[4]:7.2f}" for r in rows)
    print(f"{mode:15s} t={t}: {cells}")
print("\nthe PHD filters benefit the most from cooperation; the LMB filter")
print("mainly gains through the cardinality consensus")
