"""
Augmented memory replay
=======================

A 4-4-1 network reads (|TD|, r, H(s), H(s')) and rewrites the reward
stored in the buffer. The score the agent reports stays the raw return.
"""
import numpy as np

from amrlab import amr, ddpg, envs
from amrlab.replay import Transition

rng = np.random.default_rng(4)
env = envs.make_env("pendulum")
hp = ddpg.Hyperparams(episodes=5, max_steps_per_episode=200)
agent = ddpg.make_agent(env.spec, hp, rng)

genome = amr.random_genome(rng)
net = amr.genome_to_network(genome)
print("genome length:", genome.genes.size)

# features of one transition
s = env.reset(rng)
a = ddpg.select_action(agent, s, rng)
s_next, r, done = env.step(a)
t = Transition(s, a, r, s_next, done)
f = amr.features(agent, t)
print("features:", f)
print(f"raw reward {r:.4f} -> stored {amr.augment(net, f, hp.beta, r):.4f}")

# train with the augmenter plugged in
aug = amr.Augmenter(net, hp.beta)
for ep in range(hp.episodes):
    stats = ddpg.run_episode(agent, env, rng, aug)
    stored = np.mean([x.r for x in agent.buffer.transitions()][-stats.steps:])
    print(f"episode {ep}  raw score {stats.score:9.2f}  mean stored reward {stored:8.4f}")

# a zero genome leaves every reward untouched
zero = amr.genome_to_network(np.zeros(amr.GENOME_LENGTH))
print("zero genome:", amr.augment(zero, f, 1.0, r) == r)
