"""Resilient estimator against the RTS smoother on the two-state plant.

Runs the default experiment twice: once without sparse corruption and once
with 20 corrupted samples, then writes the comparison figures as SVG.

    python demos/01_figures.py [out_dir]
"""
import sys
from dataclasses import replace
from pathlib import Path

from resest.experiment import AnalysisBudget, ExperimentSpec, run
from resest.model import ScenarioConfig

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/figures")
spec = ExperimentSpec(analysis=AnalysisBudget(enabled=False))

for label, count in (("clean", 0), ("attacked", 20)):
    s = replace(spec, scenario=ScenarioConfig(attack_count=count))
    result = run(s, out / label)
    print(f"{label}: {count} corrupted samples")
    for row in result.outcome.rows:
        print(f"  {row.estimator:>13s}  rmse {row.rmse:8.4f}  max step error {row.max_step_error:9.4f}")

# With no corruption both estimators are close. Once spikes enter, the
# smoother follows them while the l1 data term discards them.
print(f"figures in {out / 'attacked'} (fig1.svg, fig2.svg, fig3.svg)")
