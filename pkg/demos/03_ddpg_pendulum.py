"""
Plain DDPG on the pendulum
==========================

Thirty short episodes are enough to see the swing-up cost fall.
"""
import numpy as np

from amrlab import ddpg, envs

rng = np.random.default_rng(3)
env = envs.make_env("pendulum")
hp = ddpg.Hyperparams(episodes=30, max_steps_per_episode=200)
agent = ddpg.make_agent(env.spec, hp, rng)

# exploration noise shrinks linearly over the run
for ep in range(hp.episodes):
    stats = ddpg.run_episode(agent, env, rng)
    if ep % 5 == 0 or ep == hp.episodes - 1:
        print(f"episode {ep:3d}  score {stats.score:9.2f}  sigma {stats.sigma:.2f}  "
              f"critic loss {stats.mean_critic_loss:.3f}")

# the greedy policy at the upright state should push little torque
print("mu(upright) =", ddpg.policy(agent, np.array([1.0, 0.0, 0.0])))
