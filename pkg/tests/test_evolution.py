import functools

import numpy as np
import pytest
from scipy import stats

from amrlab import amr, ddpg, envs, evolution
from amrlab.errors import ContractError
from amrlab.evolution import GaConfig, Individual

from conftest import familywise_z, small_hp


def _pop(fitnesses, rng):
    return [Individual(amr.random_genome(rng), f, 0) for f in fitnesses]


def test_config_validation():
    for bad in (dict(elite=0), dict(elite=11), dict(elite=1), dict(mutation_rate=1.5),
                dict(mutation_range=0.0), dict(generations=0), dict(seeds_per_genome=0)):
        with pytest.raises(ContractError):
            GaConfig(**bad)
    GaConfig(population=3, elite=3)


def test_derived_seeds_are_distinct_and_stable():
    seeds = {evolution.eval_seeds(0, g, i, 2) for g in range(5) for i in range(10)}
    flat = {s for pair in seeds for s in pair}
    assert len(flat) == 100
    assert evolution.eval_seeds(0, 1, 2, 1) == evolution.eval_seeds(0, 1, 2, 1)
    assert evolution.derive_seed(0, 0) != evolution.derive_seed(1, 0)


def test_parent_selection_two_to_one(rng):
    # elite 2: weights 2:1 on the first draw; the second parent is the other one
    pop = _pop([5.0, 1.0, 0.0], rng)
    n = 100_000
    first_best = sum(evolution.select_parents(pop, 2, rng)[0] is pop[0] for _ in range(n))
    p = 2 / 3
    z = (first_best - n * p) / np.sqrt(n * p * (1 - p))
    assert abs(z) < 3


def test_parent_selection_rank_weights(rng):
    fits = [3.0, 9.0, 1.0, 7.0, 5.0, 0.0, -1.0, 2.0, 4.0, 8.0]
    pop = _pop(fits, rng)
    order = sorted(range(10), key=lambda i: -fits[i])
    n = 50_000
    counts = np.zeros(10)
    for _ in range(n):
        a, b = evolution.select_parents(pop, 5, rng)
        assert a is not b
        counts[pop.index(a)] += 1
    assert counts[order[5:]].sum() == 0
    p = np.array([5, 4, 3, 2, 1]) / 15
    z = (counts[order[:5]] - n * p) / np.sqrt(n * p * (1 - p))
    assert np.abs(z).max() < familywise_z(5)


def test_parent_selection_needs_two_elites(rng):
    with pytest.raises(ContractError):
        evolution.select_parents(_pop([1.0, 2.0], rng), 1, rng)


def test_crossover_takes_each_gene_from_a_parent(rng):
    a, b = amr.Genome(np.zeros(25)), amr.Genome(np.ones(25))
    picks = np.array([evolution.crossover(a, b, rng).genes for _ in range(4000)])
    assert set(np.unique(picks)) <= {0.0, 1.0}
    n = picks.size
    z = (picks.sum() - n / 2) / np.sqrt(n / 4)
    assert abs(z) < 3


def test_crossover_length_mismatch(rng):
    with pytest.raises(ContractError):
        evolution.crossover(np.zeros(25), np.zeros(24), rng)


def test_mutation_rate_zero_is_identity(rng):
    g = amr.random_genome(rng)
    out = evolution.mutate(g, GaConfig(mutation_rate=0.0), rng)
    assert out.genes.tobytes() == g.genes.tobytes()


def test_mutation_rate_one_is_bounded(rng):
    g = amr.random_genome(rng)
    for _ in range(200):
        d = evolution.mutate(g, GaConfig(mutation_rate=1.0), rng).genes - g.genes
        assert np.all(np.abs(d) <= 0.1)
        assert np.all(d != 0)


def test_mutation_fraction(rng):
    g = amr.Genome(np.zeros(25))
    cfg = GaConfig()
    hits = sum(np.count_nonzero(evolution.mutate(g, cfg, rng).genes) for _ in range(4000))
    n = 4000 * 25
    z = (hits - n * 0.25) / np.sqrt(n * 0.25 * 0.75)
    assert abs(z) < 3


def test_mutation_deltas_uniform(rng):
    g = amr.Genome(np.zeros(25))
    d = np.concatenate([evolution.mutate(g, GaConfig(mutation_rate=1.0), rng).genes
                        for _ in range(400)])
    assert stats.kstest(d, stats.uniform(-0.1, 0.2).cdf).pvalue > 2.7e-3


def test_next_generation_keeps_elites(rng):
    pop = _pop(list(range(10)), rng)
    cfg = GaConfig()
    nxt = evolution.next_generation(pop, cfg, rng)
    assert len(nxt) == 10
    for k, i in enumerate(range(9, 4, -1)):
        assert nxt[k].genes.tobytes() == pop[i].genome.genes.tobytes()
        assert nxt[k].genes is not pop[i].genome.genes


def test_offspring_stay_near_elite_hull(rng):
    pop = _pop(list(range(10)), rng)
    elite = np.array([p.genome.genes for p in pop[5:]])
    lo, hi = elite.min(axis=0) - 0.1, elite.max(axis=0) + 0.1
    for child in evolution.next_generation(pop, GaConfig(), rng)[5:]:
        assert np.all((child.genes >= lo) & (child.genes <= hi))


def test_elite_equal_to_population_copies_everything(rng):
    pop = _pop([3.0, 1.0, 2.0], rng)
    nxt = evolution.next_generation(pop, GaConfig(population=3, elite=3), rng)
    assert [g.genes.tobytes() for g in nxt] == [pop[i].genome.genes.tobytes() for i in (0, 2, 1)]


def test_evaluate_unit_reward_sums_raw_scores():
    factory = functools.partial(envs.make_env, "unit-reward")
    hp = small_hp(episodes=200, max_steps_per_episode=1, buffer_capacity=300)
    g = amr.Genome(np.r_[np.zeros(24), 5.0])
    assert evolution.evaluate(g, factory, hp, seed=1) == 200.0


def test_zero_genome_matches_baseline(pendulum_factory):
    hp = small_hp()
    zero = evolution.evaluate(amr.Genome(np.zeros(25)), pendulum_factory, hp, 4)
    base = sum(s.score for s in evolution.run_agent(pendulum_factory, hp, 4))
    assert zero == base


def test_evaluate_is_deterministic(pendulum_factory, rng):
    g = amr.random_genome(rng)
    hp = small_hp()
    assert evolution.evaluate(g, pendulum_factory, hp, 9) == evolution.evaluate(g, pendulum_factory, hp, 9)


def test_numeric_fault_gives_minus_inf(pendulum_factory):
    g = amr.Genome(np.r_[np.zeros(24), 1e300])
    hp = small_hp(beta=1e300)
    assert evolution.evaluate(g, pendulum_factory, hp, 0) == float("-inf")


def test_single_generation_run(pendulum_factory):
    cfg = GaConfig(population=2, elite=2, generations=1, episodes_per_eval=2)
    records = evolution.run_evolution(cfg, pendulum_factory, small_hp(), 0)
    assert [(r.generation, r.individual) for r in records] == [(0, 0), (0, 1)]
    assert all(len(r.scores) == 2 for r in records)
    assert all(np.isfinite(r.fitness) for r in records)


def test_initial_population_range():
    cfg = GaConfig(population=10, elite=5, generations=1)
    records = evolution.run_evolution(cfg, None, ddpg.Hyperparams(), 3,
                                      fitness_fn=lambda g, s: (0.0, []))
    genes = np.array([r.genes for r in records])
    assert np.all(np.abs(genes) <= 1.0)
    assert len({g.tobytes() for g in genes}) == 10


def _sphere(genes, seed):
    return -float(np.sum((genes - 0.3) ** 2)), []


def test_surrogate_best_never_decreases():
    cfg = GaConfig(generations=30)
    records = evolution.run_evolution(cfg, None, ddpg.Hyperparams(), 1, fitness_fn=_sphere)
    best = evolution.best_per_generation(records)
    fits = [best[g].fitness for g in range(30)]
    assert all(b >= a for a, b in zip(fits, fits[1:]))
    assert fits[-1] > fits[0]


def test_same_seed_same_records():
    cfg = GaConfig(generations=5)
    a = evolution.run_evolution(cfg, None, ddpg.Hyperparams(), 2, fitness_fn=_sphere)
    b = evolution.run_evolution(cfg, None, ddpg.Hyperparams(), 2, fitness_fn=_sphere)
    assert [(r.fitness, r.genes.tobytes(), r.seeds) for r in a] == \
           [(r.fitness, r.genes.tobytes(), r.seeds) for r in b]


def test_evaluations_are_isolated():
    # one individual's evaluation must not depend on who else is in the population
    cfg = GaConfig(population=4, elite=2, generations=1)
    seen = {}

    def fit(genes, seed):
        seen.setdefault(seed, []).append(genes.copy())
        return float(seed % 97), []

    evolution.run_evolution(cfg, None, ddpg.Hyperparams(), 5, fitness_fn=fit)
    assert len(seen) == 4
    seeds = evolution.eval_seeds(5, 0, 2, 1)
    assert seeds[0] in seen


def test_seeds_per_genome_averages(pendulum_factory):
    cfg = GaConfig(population=2, elite=2, generations=1, episodes_per_eval=2, seeds_per_genome=2)
    records = evolution.run_evolution(cfg, pendulum_factory, small_hp(), 0)
    r = records[0]
    single = [evolution.evaluate(amr.Genome(r.genes), pendulum_factory, small_hp(episodes=2), s)
              for s in r.seeds]
    assert r.fitness == pytest.approx(np.mean(single), rel=1e-12)


def test_parallel_matches_serial(pendulum_factory):
    cfg = GaConfig(population=2, elite=2, generations=2, episodes_per_eval=1)
    serial = evolution.run_evolution(cfg, pendulum_factory, small_hp(), 0, workers=1)
    par = evolution.run_evolution(cfg, pendulum_factory, small_hp(), 0, workers=2)
    assert [r.fitness for r in serial] == [r.fitness for r in par]
