"""Augmented memory replay: a 4-4-1 network that rewrites stored rewards.

For each transition the network reads four features -- |TD error|, the raw
reward, and the entropies of the start and next states -- and its scalar
output A is folded into the reward kept in the replay buffer as
``r + beta * A``. Its 25 weights are the genome the GA evolves.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from . import neural
from .ddpg import Agent
from .entropy import state_entropy
from .errors import ContractError, NumericFault
from .replay import Transition

N_FEATURES = 4
N_HIDDEN = 4
GENOME_LENGTH = N_FEATURES * N_HIDDEN + N_HIDDEN + N_HIDDEN + 1  # 25
GENOME_HEADER = "# amrlab-genome v1"


class AmrFeatures(NamedTuple):
    abs_td: float
    reward: float
    entropy_s: float
    entropy_s_next: float

    def as_array(self):
        return np.array(self, dtype=float)


@dataclass(eq=False)
class Genome:
    genes: np.ndarray
    fitness: Optional[float] = None

    def __post_init__(self):
        self.genes = np.array(self.genes, dtype=float).ravel()
        if self.genes.size != GENOME_LENGTH:
            raise ContractError(f"genome needs {GENOME_LENGTH} genes, got {self.genes.size}")
        if not np.all(np.isfinite(self.genes)):
            raise ContractError("genome genes must be finite")


def _template(bounded: bool) -> neural.Network:
    return neural.Network([
        neural.LayerParams(np.zeros((N_HIDDEN, N_FEATURES)), np.zeros(N_HIDDEN), "tanh"),
        neural.LayerParams(np.zeros((1, N_HIDDEN)), np.zeros(1), "tanh" if bounded else "linear"),
    ])


@dataclass
class AmrNetwork:
    """The augmentation network; ``bounded`` squashes its output into [-1, 1]."""

    net: neural.Network

    def __post_init__(self):
        shapes = [l.weights.shape for l in self.net.layers]
        if shapes != [(N_HIDDEN, N_FEATURES), (1, N_HIDDEN)]:
            raise ContractError(f"AMR network must be 4-4-1, got layer shapes {shapes}")

    @property
    def bounded(self) -> bool:
        return self.net.layers[-1].activation == "tanh"

    def __call__(self, x) -> float:
        return float(neural.forward(self.net, x)[0])


def genome_to_network(g, bounded: bool = False) -> AmrNetwork:
    genes = g.genes if isinstance(g, Genome) else Genome(g).genes
    return AmrNetwork(neural.unflatten(_template(bounded), genes))


def network_to_genome(n: AmrNetwork) -> Genome:
    return Genome(neural.flatten(n.net))


def random_genome(rng: np.random.Generator, low=-1.0, high=1.0) -> Genome:
    return Genome(rng.uniform(low, high, size=GENOME_LENGTH))


def features(agent: Agent, t: Transition) -> AmrFeatures:
    """AMR inputs for one transition, using the raw (unaugmented) reward."""
    s = np.asarray(t.s, dtype=float)
    s_next = np.asarray(t.s_next, dtype=float)
    y = float(t.r)
    if not t.terminal:
        a_next = neural.forward(agent.target_actor, s_next) * agent.action_scale + agent.action_offset
        y += agent.hp.gamma * neural.forward(agent.target_critic, np.concatenate([s_next, a_next]))[0]
    q = neural.forward(agent.critic, np.concatenate([s, np.asarray(t.a, dtype=float)]))[0]
    return AmrFeatures(
        abs_td=float(abs(y - q)),
        reward=float(t.r),
        entropy_s=float(state_entropy(t.s)),
        entropy_s_next=float(state_entropy(t.s_next)),
    )


def augment(amr: AmrNetwork, f: AmrFeatures, beta: float, r: float) -> float:
    """Rewritten reward r + beta * A(f)."""
    x = f.as_array()
    if not np.all(np.isfinite(x)):
        raise NumericFault(f"non-finite AMR features {f}")
    out = r + beta * amr(x)
    if not np.isfinite(out):
        raise NumericFault(f"augmented reward is {out}")
    return float(out)


class Augmenter:
    """Callable plugged into `ddpg.run_episode` to rewrite rewards at store time."""

    def __init__(self, amr: AmrNetwork, beta: float):
        self.amr = amr
        self.beta = beta

    def __call__(self, agent: Agent, t: Transition) -> float:
        return augment(self.amr, features(agent, t), self.beta, t.r)


def save_genome(g, path) -> None:
    genes = g.genes if isinstance(g, Genome) else Genome(g).genes
    lines = [GENOME_HEADER, f"length {genes.size}"]
    lines += [repr(float(x)) for x in genes]
    Path(path).write_text("\n".join(lines) + "\n")


def load_genome(path) -> Genome:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != GENOME_HEADER:
        raise ContractError(f"{path}: missing header {GENOME_HEADER!r}")
    try:
        key, n = lines[1].split()
        n = int(n)
    except (IndexError, ValueError):
        raise ContractError(f"{path}: malformed length line") from None
    if key != "length" or len(lines) - 2 != n:
        raise ContractError(f"{path}: declared {n} genes, found {len(lines) - 2}")
    return Genome([float(x) for x in lines[2:]])
