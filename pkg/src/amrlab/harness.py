"""Experiment orchestration: configs, baseline and evolution runs, comparison.

A run directory holds ``manifest.json`` (config echo, package version,
master seed, completion flag) plus the mode's outputs:

* baseline    -> ``episodes.csv``
* evolve      -> ``generations.csv``, ``best_genome_gen{K}.txt``, ``summary.json``
* eval-genome -> ``eval.json``

CSV floats are written with ``repr`` so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, amr, ddpg, envs, evolution
from .errors import ContractError, NumericFault

MODES = ("baseline", "evolve", "eval-genome")
EPISODE_FIELDS = ["env", "run", "seed", "episode", "score", "steps", "sigma", "mean_critic_loss"]
GENERATION_FIELDS = ["env", "generation", "individual", "seeds", "fitness", "scores"]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending line."""


@dataclass
class ExperimentConfig:
    env: str = "pendulum"
    env_params: dict = field(default_factory=dict)
    hp: ddpg.Hyperparams = field(default_factory=ddpg.Hyperparams)
    ga: evolution.GaConfig = field(default_factory=evolution.GaConfig)
    mode: str = "baseline"
    master_seed: int = 0
    out_dir: str = "runs/default"
    repeat: int = 1
    workers: int = 1
    genome: str | None = None

    def env_factory(self):
        return functools.partial(envs.make_env, self.env, **self.env_params)

    def to_dict(self) -> dict:
        return {
            "env": self.env,
            "env_params": dict(self.env_params),
            "hyperparams": self.hp.to_dict(),
            "ga": self.ga.to_dict(),
            "mode": self.mode,
            "master_seed": self.master_seed,
            "repeat": self.repeat,
            "workers": self.workers,
            "genome": self.genome,
        }


def _key_lines(text: str) -> dict:
    """Map dotted key paths of a YAML mapping to 1-based line numbers."""
    lines = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}{k.value}"
                lines[path] = k.start_mark.line + 1
                walk(v, path + ".")

    root = yaml.compose(text)
    if root is not None:
        walk(root, "")
    return lines


def _build_section(cls, values, section, where):
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigError(f"{where(section)}: '{section}' must be a mapping")
    valid = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in valid:
            raise ConfigError(f"{where(section + '.' + key)}: unknown key '{section}.{key}'")
    try:
        return cls(**values)
    except (ContractError, TypeError) as exc:
        # blame the first key that is invalid on its own, else the section
        for key, val in values.items():
            try:
                cls(**{key: val})
            except (ContractError, TypeError) as single:
                raise ConfigError(
                    f"{where(section + '.' + key)}: {section}.{key}={val!r}: {single}") from None
        raise ConfigError(f"{where(section)}: {exc}") from None


def parse_config(text: str, source: str = "<config>", **overrides) -> ExperimentConfig:
    """Build an `ExperimentConfig` from YAML text; missing keys take defaults.

    ``overrides`` (e.g. from CLI flags) replace top-level fields afterwards.
    """
    try:
        raw = yaml.safe_load(text) or {}
        lines = _key_lines(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping")

    def where(key):
        return f"{source}:{lines.get(key, 1)}"

    top = {"env", "env_params", "hyperparams", "ga", "mode", "master_seed", "out_dir",
           "repeat", "workers", "genome"}
    for key in raw:
        if key not in top:
            raise ConfigError(f"{where(key)}: unknown key '{key}'")
    cfg = ExperimentConfig(
        hp=_build_section(ddpg.Hyperparams, raw.get("hyperparams"), "hyperparams", where),
        ga=_build_section(evolution.GaConfig, raw.get("ga"), "ga", where),
    )
    for key in ("env", "env_params", "mode", "master_seed", "out_dir", "repeat", "workers",
                "genome"):
        if key in raw:
            setattr(cfg, key, raw[key])
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)

    if cfg.env not in envs.ENVIRONMENTS:
        raise ConfigError(f"{where('env')}: unknown environment {cfg.env!r}; "
                          f"choose from {sorted(envs.ENVIRONMENTS)}")
    if not isinstance(cfg.env_params, dict):
        raise ConfigError(f"{where('env_params')}: env_params must be a mapping")
    try:
        envs.make_env(cfg.env, **cfg.env_params)
    except (TypeError, ContractError) as exc:
        raise ConfigError(f"{where('env_params')}: {exc}") from None
    if cfg.mode not in MODES:
        raise ConfigError(f"{where('mode')}: mode must be one of {MODES}")
    for key in ("master_seed", "repeat", "workers"):
        val = getattr(cfg, key)
        if not isinstance(val, int) or isinstance(val, bool) or val < (0 if key == "master_seed" else 1):
            raise ConfigError(f"{where(key)}: {key} must be a "
                              f"{'non-negative' if key == 'master_seed' else 'positive'} integer")
    if cfg.mode == "eval-genome" and not cfg.genome:
        raise ConfigError(f"{where('genome')}: eval-genome needs a genome file")
    return cfg


def load_config(path=None, **overrides) -> ExperimentConfig:
    text = Path(path).read_text() if path else ""
    return parse_config(text, str(path) if path else "<defaults>", **overrides)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_manifest(out: Path, cfg: ExperimentConfig, complete: bool, **extra):
    doc = {
        "package": "amrlab",
        "version": __version__,
        "master_seed": cfg.master_seed,
        "complete": complete,
        "config": cfg.to_dict(),
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


baseline_run = evolution.run_agent


def _run_baseline(cfg: ExperimentConfig, out: Path):
    factory = cfg.env_factory()
    seeds = [evolution.derive_seed(cfg.master_seed, evolution._BASELINE, rep)
             for rep in range(cfg.repeat)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            runs = list(pool.map(baseline_run, [factory] * cfg.repeat, [cfg.hp] * cfg.repeat, seeds))
    else:
        runs = [baseline_run(factory, cfg.hp, s) for s in seeds]
    with open(out / "episodes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_FIELDS)
        for rep, (seed, stats) in enumerate(zip(seeds, runs)):
            for ep, st in enumerate(stats):
                w.writerow([cfg.env, rep, seed, ep, _fmt(float(st.score)), st.steps,
                            _fmt(float(st.sigma)), _fmt(float(st.mean_critic_loss))])
    fitness = [float(sum(st.score for st in stats)) for stats in runs]
    return {"runs": cfg.repeat, "mean_fitness": float(np.mean(fitness))}


def _run_evolve(cfg: ExperimentConfig, out: Path):
    fh = open(out / "generations.csv", "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(GENERATION_FIELDS)
    per_gen = []

    def log_generation(gen, records):
        for r in records:
            w.writerow([cfg.env, r.generation, r.individual, ";".join(map(str, r.seeds)),
                        _fmt(float(r.fitness)), ";".join(_fmt(float(s)) for s in r.scores)])
        fh.flush()
        best = max(records, key=lambda r: r.fitness)
        amr.save_genome(best.genes, out / f"best_genome_gen{gen}.txt")
        fits = np.array([r.fitness for r in records])
        finite = fits[np.isfinite(fits)]
        per_gen.append({
            "generation": gen,
            "mean_fitness": float(finite.mean()) if finite.size else float("-inf"),
            "max_fitness": float(fits.max()),
            "faults": int((~np.isfinite(fits)).sum()),
        })

    try:
        evolution.run_evolution(cfg.ga, cfg.env_factory(), cfg.hp, cfg.master_seed,
                                workers=cfg.workers, on_generation=log_generation)
    finally:
        fh.close()
    summary = {"env": cfg.env, "generations": per_gen}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return {"final_mean_fitness": per_gen[-1]["mean_fitness"]}


def _run_eval_genome(cfg: ExperimentConfig, out: Path):
    genome = amr.load_genome(cfg.genome)
    seeds = evolution.baseline_seeds(cfg.master_seed, 0, cfg.ga.seeds_per_genome)
    hp = dataclasses.replace(cfg.hp, episodes=cfg.ga.episodes_per_eval)
    fits = []
    for s in seeds:
        stats = evolution.run_agent(cfg.env_factory(), hp, s, genome)
        fits.append(float(sum(st.score for st in stats)))
    result = {"env": cfg.env, "seeds": list(seeds), "fitness": float(np.mean(fits)),
              "per_seed": fits}
    (out / "eval.json").write_text(json.dumps(result, indent=2) + "\n")
    print(f"fitness {result['fitness']!r}")
    return {"fitness": result["fitness"]}


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment; returns the process exit status.

    0 on success, 3 on a numeric fault (the manifest stays flagged incomplete).
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, cfg, complete=False)
    runner = {"baseline": _run_baseline, "evolve": _run_evolve,
              "eval-genome": _run_eval_genome}[cfg.mode]
    try:
        result = runner(cfg, out)
    except NumericFault as exc:
        _write_manifest(out, cfg, complete=False, error=f"numeric fault: {exc}")
        print(f"numeric fault: {exc}")
        return 3
    _write_manifest(out, cfg, complete=True, result=result)
    return 0


# ---------------------------------------------------------------- comparison


def percent_improvement(amr_mean: float, baseline_mean: float) -> float:
    """100 * (amr - baseline) / |baseline|."""
    if baseline_mean == 0:
        raise ContractError("percent improvement is undefined for a zero baseline")
    return 100.0 * (amr_mean - baseline_mean) / abs(baseline_mean)


@dataclass
class ComparisonSummary:
    env: str
    generations: list
    amr_mean: list
    amr_max: list
    baseline_mean: float
    baseline_band: tuple
    baseline_runs: int
    percent_improvement: float
    first_below_baseline: bool
    crossover_generation: int | None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def table(self) -> str:
        lo, hi = self.baseline_band
        rows = [f"env {self.env}: baseline mean {self.baseline_mean:.2f} "
                f"[{lo:.2f}, {hi:.2f}] over {self.baseline_runs} runs",
                f"{'gen':>4} {'amr mean':>12} {'amr max':>12} {'vs base %':>10}"]
        for g, m, x in zip(self.generations, self.amr_mean, self.amr_max):
            rows.append(f"{g:>4} {m:>12.2f} {x:>12.2f} "
                        f"{percent_improvement(m, self.baseline_mean):>10.2f}")
        rows.append(f"final-generation improvement: {self.percent_improvement:+.2f}%")
        rows.append(f"crossover generation: {self.crossover_generation}")
        return "\n".join(rows)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def compare(baseline_log, evolve_log) -> ComparisonSummary:
    """Summarise an evolve run against a baseline run.

    Baseline fitness is the per-run sum of episode scores; it is compared
    with the per-generation mean (finite values only) and max of the GA.
    """
    base_rows = _read_csv(baseline_log)
    evo_rows = _read_csv(evolve_log)
    if not base_rows or not evo_rows:
        raise ContractError("empty log")
    base_envs = {r["env"] for r in base_rows}
    evo_envs = {r["env"] for r in evo_rows}
    if len(base_envs) != 1 or base_envs != evo_envs:
        raise ContractError(f"env mismatch: baseline {sorted(base_envs)} vs evolve {sorted(evo_envs)}")

    runs = {}
    for r in base_rows:
        runs.setdefault(r["run"], []).append(float(r["score"]))
    base_fit = np.array([sum(v) for v in runs.values()])
    ep_counts = {len(v) for v in runs.values()}
    evo_counts = {len(r["scores"].split(";")) for r in evo_rows if r["scores"]}
    if evo_counts and evo_counts != ep_counts:
        raise ContractError(f"episode counts differ: baseline {sorted(ep_counts)} "
                            f"vs evolve {sorted(evo_counts)}")

    by_gen = {}
    for r in evo_rows:
        by_gen.setdefault(int(r["generation"]), []).append(float(r["fitness"]))
    gens = sorted(by_gen)
    means, maxes = [], []
    for g in gens:
        f = np.array(by_gen[g])
        finite = f[np.isfinite(f)]
        means.append(float(finite.mean()) if finite.size else float("-inf"))
        maxes.append(float(f.max()))

    b_mean = float(base_fit.mean())
    half = 1.96 * float(base_fit.std(ddof=1)) / math.sqrt(len(base_fit)) if len(base_fit) > 1 else 0.0
    below = [m < b_mean for m in means]
    crossover = None
    if below[0]:
        crossover = next((g for g, b in zip(gens, below) if not b), None)
    return ComparisonSummary(
        env=base_envs.pop(),
        generations=gens,
        amr_mean=means,
        amr_max=maxes,
        baseline_mean=b_mean,
        baseline_band=(b_mean - half, b_mean + half),
        baseline_runs=len(base_fit),
        percent_improvement=percent_improvement(means[-1], b_mean),
        first_below_baseline=below[0],
        crossover_generation=crossover,
    )
