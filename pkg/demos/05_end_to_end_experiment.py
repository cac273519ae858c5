"""A reduced end-to-end Monte Carlo experiment.

Runs the ring scenario at small scale, prints the acceptance statistics,
and writes the CSV report.  The command-line equivalent is

    adle --config scenario.yaml --out out/

with the scenario shown in the README; the full-scale tolerances need
hundreds of trials and horizons of 50k+ steps (see tests/test_acceptance.py).
"""

import tempfile
from pathlib import Path

import numpy as np

from adle.cli import ScenarioConfig, example1_graph, example1_model
from adle.harness import run_experiment, write_report
from adle.network import TopologyModel
from adle.schedule import WeightSchedule

config = ScenarioConfig(
    model=example1_model(),
    topology=TopologyModel(example1_graph(), "bernoulli", 0.5),
    schedule=WeightSchedule(b=0.5),
    horizon=20_000,
    num_trials=64,
    master_seed=20260810,
)

print(f"running {config.num_trials} trials to horizon {config.horizon} ...")
report = run_experiment(config)

print("\nper-agent covariance gap to the centralized benchmark:")
print(" ", np.round(report.rel_frobenius_gap, 3), "(sampling noise dominates at 64 trials)")
print("paired centralized baseline gap:", round(report.centralized_baseline_gap, 3))
print("median-error decay slopes:", np.round(report.consistency_decay, 2))
print("disagreement decay slope: ", round(report.disagreement_slope, 2))
print("terminal gain gap, median over trials:",
      round(float(np.median(report.terminal_gain_gap)), 4))

outdir = Path(tempfile.mkdtemp(prefix="adle-demo-"))
stats = write_report(report, outdir, config.acceptance)
print(f"\nreport written to {outdir}:")
for stat in stats:
    print(f"  {stat.name:<26} {stat.value:>10.4g}  {stat.requirement:<12} "
          f"{'PASS' if stat.passed else 'FAIL'}")
