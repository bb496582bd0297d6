"""
The GA on a toy problem
=======================

Fitness here is -||g - 0.3||^2, so the run takes seconds instead of hours.
"""
import numpy as np

from amrlab import ddpg, evolution

target = np.full(25, 0.3)


def sphere(genes, seed):
    return -float(np.sum((genes - target) ** 2)), []


cfg = evolution.GaConfig(generations=200)
records = evolution.run_evolution(cfg, None, ddpg.Hyperparams(), master_seed=0, fitness_fn=sphere)
best = evolution.best_per_generation(records)
for g in (0, 10, 50, 100, 199):
    dist = np.max(np.abs(best[g].genes - target))
    print(f"gen {g:3d}  best fitness {best[g].fitness:8.4f}  max |g - g*| {dist:.3f}")

# elites are copied unchanged, so the best fitness never drops
fits = [best[g].fitness for g in range(cfg.generations)]
print("monotone:", all(b >= a for a, b in zip(fits, fits[1:])))
