"""
Running experiments from a config
=================================

The same entry points back the ``amrlab`` command:

    amrlab baseline --config exp.yaml --out runs/base
    amrlab evolve   --config exp.yaml --out runs/evo
    amrlab compare runs/base runs/evo
"""
import tempfile
from pathlib import Path

from amrlab import harness

CONFIG = """
env: pendulum
env_params: {max_steps: 50}
repeat: 4
hyperparams: {episodes: 5}
ga:
  population: 4
  elite: 2
  generations: 3
  episodes_per_eval: 5
"""

root = Path(tempfile.mkdtemp(prefix="amrlab-demo-"))
for mode in ("baseline", "evolve"):
    cfg = harness.parse_config(CONFIG, mode=mode, master_seed=1, out_dir=str(root / mode))
    harness.run(cfg)

summary = harness.compare(root / "baseline" / "episodes.csv", root / "evolve" / "generations.csv")
print(summary.table())
print("outputs in", root)
