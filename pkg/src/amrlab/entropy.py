"""Entropy of a single state vector, used as an AMR input feature."""
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class EntropyConfig:
    epsilon: float = 1e-8
    normalize: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractError("epsilon must be positive")


DEFAULT = EntropyConfig()


def state_entropy(s, cfg: EntropyConfig = DEFAULT) -> float:
    """Shannon entropy of the smoothed, L1-normalised magnitudes of ``s``.

    p_i = (|s_i| + eps) / sum_j (|s_j| + eps); the result is H(p) / ln(n)
    when ``cfg.normalize`` is set, so it lies in [0, 1]. An all-zero state
    smooths to the uniform distribution and scores 1.
    """
    s = np.asarray(s, dtype=float).ravel()
    if s.size < 2:
        raise ContractError("state entropy needs at least two components")
    if not np.all(np.isfinite(s)):
        raise ContractError("state must be finite")
    w = np.abs(s) + cfg.epsilon
    p = w / w.sum()
    h = float(-np.sum(p * np.log(p)))
    if cfg.normalize:
        h /= np.log(s.size)
        # rounding can push a uniform vector a hair outside the unit interval
        h = min(max(h, 0.0), 1.0)
    return h
