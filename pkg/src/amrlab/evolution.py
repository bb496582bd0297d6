"""Genetic algorithm over AMR genomes.

Each generation every genome is scored by training a fresh DDPG agent with
that genome's augmentation network and summing its raw episode returns.
The best ``elite`` genomes survive unchanged; the rest of the next
population is bred from them by rank-weighted parent selection, uniform
crossover and per-gene bounded mutation.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from . import amr, ddpg
from .errors import ContractError, NumericFault

# stream tags keep the derived seed families disjoint
_EVAL, _BASELINE, _BREED, _INIT = 0, 1, 2, 3


@dataclass
class GaConfig:
    population: int = 10
    elite: int = 5
    generations: int = 75
    mutation_rate: float = 0.25
    mutation_range: float = 0.1
    episodes_per_eval: int = 200
    seeds_per_genome: int = 1
    init_range: float = 1.0

    def __post_init__(self):
        checks = [
            (self.population >= 1, "population must be positive"),
            (1 <= self.elite <= self.population, "elite must lie in [1, population]"),
            (self.elite == self.population or self.elite >= 2,
             "breeding needs at least 2 elites"),
            (self.generations >= 1, "generations must be positive"),
            (0.0 <= self.mutation_rate <= 1.0, "mutation_rate must lie in [0, 1]"),
            (self.mutation_range > 0, "mutation_range must be positive"),
            (self.episodes_per_eval >= 1, "episodes_per_eval must be positive"),
            (self.seeds_per_genome >= 1, "seeds_per_genome must be positive"),
            (self.init_range > 0, "init_range must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ContractError(msg)

    @classmethod
    def from_dict(cls, d: dict) -> "GaConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ContractError(f"unknown GA setting(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(eq=False)
class Individual:
    genome: amr.Genome
    fitness: float
    eval_seed: int


@dataclass
class EvalRecord:
    generation: int
    individual: int
    seeds: tuple
    fitness: float
    scores: list = field(default_factory=list)
    genes: Optional[np.ndarray] = None

    @property
    def seed(self) -> int:
        return self.seeds[0]


def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic 63-bit seed for a (master_seed, stream, ...) path."""
    ss = np.random.SeedSequence([int(master_seed), *map(int, path)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def eval_seeds(master_seed, generation, individual, k):
    return tuple(derive_seed(master_seed, _EVAL, generation, individual, j) for j in range(k))


def baseline_seeds(master_seed, repeat, k):
    return tuple(derive_seed(master_seed, _BASELINE, repeat, j) for j in range(k))


def run_agent(env_factory, hp: ddpg.Hyperparams, seed: int, genome=None) -> list:
    """Train a fresh agent for ``hp.episodes`` episodes; one `EpisodeStats` per episode.

    Without ``genome`` this is plain DDPG.
    """
    rng = np.random.default_rng(seed)
    env = env_factory()
    agent = ddpg.make_agent(env.spec, hp, rng)
    augmenter = None
    if genome is not None:
        augmenter = amr.Augmenter(amr.genome_to_network(genome, hp.amr_bounded), hp.beta)
    return [ddpg.run_episode(agent, env, rng, augmenter) for _ in range(hp.episodes)]


def evaluate_scores(genome, env_factory, hp: ddpg.Hyperparams, seed: int):
    """(fitness, per-episode scores); a numeric fault yields fitness -inf."""
    try:
        scores = [st.score for st in run_agent(env_factory, hp, seed, genome)]
    except NumericFault:
        return float("-inf"), []
    return float(np.sum(scores)), scores


def evaluate(genome, env_factory, hp: ddpg.Hyperparams, seed: int) -> float:
    """Cumulative raw score of one learning run with ``genome`` active."""
    return evaluate_scores(genome, env_factory, hp, seed)[0]


def _rank_order(pop):
    # stable: ties keep population order
    return sorted(range(len(pop)), key=lambda i: -pop[i].fitness)


def select_parents(pop, elite: int, rng: np.random.Generator):
    """Two distinct parents from the ``elite`` best, weighted by rank.

    Rank r (1 = best) has weight elite + 1 - r. The first parent is drawn
    with those weights, the second from the remaining elites with the
    weights renormalised.
    """
    if elite < 2 or len(pop) < elite:
        raise ContractError("parent selection needs at least 2 elites")
    order = _rank_order(pop)[:elite]
    w = np.arange(elite, 0, -1, dtype=float)
    first = rng.choice(elite, p=w / w.sum())
    w[first] = 0.0
    second = rng.choice(elite, p=w / w.sum())
    return pop[order[first]], pop[order[second]]


def _genes(g):
    return g.genes if isinstance(g, amr.Genome) else np.asarray(g, dtype=float)


def crossover(p1, p2, rng: np.random.Generator) -> amr.Genome:
    """Uniform crossover: each gene from either parent with probability 1/2."""
    a, b = _genes(p1), _genes(p2)
    if a.shape != b.shape:
        raise ContractError("parents differ in length")
    take_first = rng.random(a.size) < 0.5
    return amr.Genome(np.where(take_first, a, b))


def mutate(g, cfg: GaConfig, rng: np.random.Generator) -> amr.Genome:
    genes = _genes(g)
    hit = rng.random(genes.size) < cfg.mutation_rate
    delta = rng.uniform(-cfg.mutation_range, cfg.mutation_range, size=genes.size)
    return amr.Genome(np.where(hit, genes + delta, genes))


def next_generation(pop, cfg: GaConfig, rng: np.random.Generator):
    """Elite genomes copied verbatim, then mutated crossover offspring."""
    order = _rank_order(pop)
    out = [amr.Genome(pop[i].genome.genes.copy()) for i in order[:cfg.elite]]
    while len(out) < cfg.population:
        p1, p2 = select_parents(pop, cfg.elite, rng)
        out.append(mutate(crossover(p1.genome, p2.genome, rng), cfg, rng))
    return out


FitnessFn = Callable[[np.ndarray, int], tuple]


class RLFitness:
    """Picklable fitness: mean cumulative score of learning runs with the genome."""

    def __init__(self, env_factory, hp: ddpg.Hyperparams):
        self.env_factory = env_factory
        self.hp = hp

    def __call__(self, genes, seed):
        return evaluate_scores(amr.Genome(genes), self.env_factory, self.hp, seed)


def _score_individual(fitness_fn, genes, seeds):
    results = [fitness_fn(genes, s) for s in seeds]
    fits = [f for f, _ in results]
    if any(not np.isfinite(f) for f in fits):
        return float("-inf"), []
    per_episode = [sc for _, sc in results]
    scores = list(np.mean(per_episode, axis=0)) if per_episode and per_episode[0] else []
    return float(np.mean(fits)), scores


def run_evolution(cfg: GaConfig, env_factory, hp: ddpg.Hyperparams, master_seed: int,
                  fitness_fn: FitnessFn | None = None, workers: int = 1,
                  on_generation=None):
    """Evolve AMR genomes; returns every evaluation as an `EvalRecord`.

    ``fitness_fn(genes, seed) -> (fitness, per_episode_scores)`` replaces
    the RL evaluation when given (used for surrogate problems). With
    ``seeds_per_genome > 1`` fitness is the mean over seeds.
    ``on_generation(generation, records)`` is called after each generation.
    """
    hp = dataclasses.replace(hp, episodes=cfg.episodes_per_eval)
    if fitness_fn is None:
        fitness_fn = RLFitness(env_factory, hp)
    init_rng = np.random.default_rng(derive_seed(master_seed, _INIT))
    genomes = [amr.random_genome(init_rng, -cfg.init_range, cfg.init_range)
               for _ in range(cfg.population)]
    records = []
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for gen in range(cfg.generations):
            seeds = [eval_seeds(master_seed, gen, i, cfg.seeds_per_genome)
                     for i in range(cfg.population)]
            args = [(fitness_fn, g.genes, s) for g, s in zip(genomes, seeds)]
            if pool is None:
                results = [_score_individual(*a) for a in args]
            else:
                results = list(pool.map(_score_individual, *zip(*args)))
            pop = []
            gen_records = []
            for i, (g, s, (fit, scores)) in enumerate(zip(genomes, seeds, results)):
                pop.append(Individual(g, fit, s[0]))
                gen_records.append(EvalRecord(gen, i, s, fit, scores, g.genes.copy()))
            records.extend(gen_records)
            if on_generation is not None:
                on_generation(gen, gen_records)
            if gen + 1 < cfg.generations:
                breed_rng = np.random.default_rng(derive_seed(master_seed, _BREED, gen))
                genomes = next_generation(pop, cfg, breed_rng)
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def best_per_generation(records):
    """{generation: best EvalRecord} (first index wins ties)."""
    best = {}
    for r in records:
        cur = best.get(r.generation)
        if cur is None or r.fitness > cur.fitness:
            best[r.generation] = r
    return best
