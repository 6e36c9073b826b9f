"""Error versus corruption magnitude.

The same corrupted samples are rescaled by 1, 10 and 100. The resilient
estimate does not move; the smoother error grows with the spikes.

    python demos/03_magnitude_sweep.py [out_dir]
"""
import sys
from pathlib import Path

from resest.experiment import AnalysisBudget, ExperimentSpec, sweep
from resest.model import ScenarioConfig, reference_system

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/sweep")
spec = ExperimentSpec(
    model=reference_system(50),
    scenario=ScenarioConfig(seed=0, process_noise_std=0.0, dense_snr_db=None, attack_count=3,
                            attack_magnitude_range=(1e6, 1e6)),
    analysis=AnalysisBudget(enabled=False),
)
rows = sweep(spec, "attack_scale", [1, 10, 100], out)
print(f"{'scale':>6s} {'estimator':>13s} {'rmse':>14s}")
for variable, value, name, *rest in rows:
    print(f"{value:>6} {name:>13s} {float(rest[spec.model.n]):14.6g}")
print(f"table in {out / 'sweep.csv'}")
