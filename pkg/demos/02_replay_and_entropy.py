"""
Replay buffer and state entropy
===============================
"""
import numpy as np

from amrlab.entropy import state_entropy
from amrlab.replay import ReplayBuffer, Transition

rng = np.random.default_rng(1)

# ring buffer of capacity 5: after 8 pushes the oldest 3 are gone
buf = ReplayBuffer(capacity=5, state_dim=2, action_dim=1)
for i in range(8):
    buf.push(Transition(np.array([i, 0.0]), np.array([0.0]), float(i), np.array([0.0, i]), False))
print("rewards kept:", [t.r for t in buf.transitions()])

# uniform minibatches without replacement
batch = buf.sample_batch(3, rng)
print("batch rewards:", batch.r)

# entropy of the normalised magnitudes, scaled to [0, 1]
for s in ([1, 1, 1], [1, 0, 0], [3, 1], [0.955, 0.296, 2.0]):
    print(f"H({s}) = {state_entropy(s):.4f}")
