"""Small deterministic continuous-control tasks.

Every environment exposes ``spec``, ``reset(rng) -> state`` and
``step(action) -> (state, reward, terminal)``. Actions are clipped to the
spec bounds. Rewards are dense, non-positive and computed from the state
the action was taken in, so a step taken at the goal with zero action
earns exactly 0. ``terminal`` is raised at the goal (where one exists) or
when ``max_steps`` steps have elapsed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_steps: int

    def __post_init__(self):
        if self.state_dim < 1 or self.action_dim < 1 or self.max_steps < 1:
            raise ContractError("dimensions and max_steps must be positive")
        lo = np.asarray(self.action_low, dtype=float)
        hi = np.asarray(self.action_high, dtype=float)
        if lo.shape != (self.action_dim,) or hi.shape != (self.action_dim,):
            raise ContractError("action bounds must match action_dim")
        if not np.all(lo < hi):
            raise ContractError("action_low must be below action_high")
        object.__setattr__(self, "action_low", lo)
        object.__setattr__(self, "action_high", hi)


def angle_normalize(x):
    return ((x + np.pi) % (2 * np.pi)) - np.pi


class Env:
    spec: EnvSpec

    def __init__(self):
        self.t = 0

    def _clip_action(self, a):
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape != (self.spec.action_dim,):
            raise ContractError(f"action shape {a.shape}, expected ({self.spec.action_dim},)")
        if not np.all(np.isfinite(a)):
            raise ContractError("non-finite action")
        return np.clip(a, self.spec.action_low, self.spec.action_high)

    def _tick(self) -> bool:
        self.t += 1
        return self.t >= self.spec.max_steps


class Pendulum(Env):
    """Torque-limited pendulum swing-up; theta = 0 is upright.

    theta_ddot = 3g/(2l) sin(theta) + 3/(m l^2) u, integrated with
    semi-implicit Euler (velocity first, clamped to +-max_speed).
    State: [cos theta, sin theta, theta_dot].
    Reward: -(theta^2 + 0.1 theta_dot^2 + 0.001 u^2), theta wrapped to [-pi, pi).
    """

    def __init__(self, g=10.0, m=1.0, l=1.0, dt=0.05, max_torque=2.0, max_speed=8.0,
                 max_steps=200):
        super().__init__()
        self.g, self.m, self.l, self.dt = g, m, l, dt
        self.max_torque, self.max_speed = max_torque, max_speed
        self.spec = EnvSpec("pendulum", 3, 1, [-max_torque], [max_torque], max_steps)
        self.theta = 0.0
        self.theta_dot = 0.0

    def set_state(self, theta, theta_dot):
        self.theta, self.theta_dot = float(theta), float(theta_dot)
        return self.observe()

    def observe(self):
        return np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])

    def reset(self, rng):
        self.t = 0
        self.theta = rng.uniform(-np.pi, np.pi)
        self.theta_dot = rng.uniform(-1.0, 1.0)
        return self.observe()

    def step(self, a):
        u = self._clip_action(a)[0]
        th, thdot = self.theta, self.theta_dot
        cost = angle_normalize(th) ** 2 + 0.1 * thdot ** 2 + 0.001 * u ** 2
        acc = 3 * self.g / (2 * self.l) * np.sin(th) + 3.0 / (self.m * self.l ** 2) * u
        thdot = float(np.clip(thdot + acc * self.dt, -self.max_speed, self.max_speed))
        self.theta = float(angle_normalize(th + thdot * self.dt))
        self.theta_dot = thdot
        return self.observe(), -float(cost), self._tick()


class Reacher2D(Env):
    """Kinematic two-link planar arm reaching a random target.

    Actions are joint angular-velocity increments (rad/s) applied on top of
    a damped velocity: qdot <- clip(damping * qdot + a, +-max_speed),
    q <- q + qdot * dt. q2 is the elbow angle relative to the first link.
    State: [cos q1, sin q1, cos q2, sin q2, qdot1, qdot2, tip_x - target_x, tip_y - target_y].
    Reward: -||tip - target|| - 0.01 ||a||^2. Terminal when the tip ends a
    step within ``goal_tolerance`` of the target.
    """

    def __init__(self, link1=0.1, link2=0.11, dt=0.05, damping=0.8, max_speed=4.0,
                 max_increment=1.0, goal_tolerance=0.01, target_rmin=0.05, target_rmax=0.2,
                 max_steps=100):
        super().__init__()
        self.link1, self.link2, self.dt = link1, link2, dt
        self.damping, self.max_speed = damping, max_speed
        self.goal_tolerance = goal_tolerance
        self.target_rmin, self.target_rmax = target_rmin, target_rmax
        self.spec = EnvSpec("reacher2d", 8, 2, [-max_increment] * 2, [max_increment] * 2,
                            max_steps)
        self.q = np.zeros(2)
        self.qdot = np.zeros(2)
        self.target = np.zeros(2)

    def tip(self):
        q1, q2 = self.q
        return np.array([
            self.link1 * np.cos(q1) + self.link2 * np.cos(q1 + q2),
            self.link1 * np.sin(q1) + self.link2 * np.sin(q1 + q2),
        ])

    def observe(self):
        return np.concatenate([
            [np.cos(self.q[0]), np.sin(self.q[0]), np.cos(self.q[1]), np.sin(self.q[1])],
            self.qdot, self.tip() - self.target,
        ])

    def set_state(self, q, qdot, target):
        self.q = np.array(q, dtype=float)
        self.qdot = np.array(qdot, dtype=float)
        self.target = np.array(target, dtype=float)
        return self.observe()

    def reset(self, rng):
        self.t = 0
        self.q = rng.uniform(-np.pi, np.pi, size=2)
        self.qdot = np.zeros(2)
        radius = rng.uniform(self.target_rmin, self.target_rmax)
        angle = rng.uniform(-np.pi, np.pi)
        self.target = radius * np.array([np.cos(angle), np.sin(angle)])
        return self.observe()

    def step(self, a):
        a = self._clip_action(a)
        reward = -float(np.linalg.norm(self.tip() - self.target)) - 0.01 * float(a @ a)
        self.qdot = np.clip(self.damping * self.qdot + a, -self.max_speed, self.max_speed)
        self.q = angle_normalize(self.q + self.qdot * self.dt)
        at_goal = np.linalg.norm(self.tip() - self.target) < self.goal_tolerance
        timeout = self._tick()
        return self.observe(), reward, bool(at_goal or timeout)


class PointMass(Env):
    """Double integrator in the box [-1, 1]^2 steering to a random goal.

    v <- clip(v + a dt, +-max_speed); p <- clip(p + v dt, +-1), with the
    velocity component zeroed on contact with a wall.
    State: [p_x - g_x, p_y - g_y, v_x, v_y].
    Reward: -||p - g|| - 0.01 ||a||^2. Terminal when the mass ends a step
    within ``goal_tolerance`` of the goal moving slower than ``stop_speed``.
    """

    def __init__(self, dt=0.1, max_force=1.0, max_speed=1.0, goal_tolerance=0.05,
                 stop_speed=0.1, goal_range=0.8, max_steps=100):
        super().__init__()
        self.dt, self.max_speed = dt, max_speed
        self.goal_tolerance, self.stop_speed, self.goal_range = goal_tolerance, stop_speed, goal_range
        self.spec = EnvSpec("pointmass", 4, 2, [-max_force] * 2, [max_force] * 2, max_steps)
        self.p = np.zeros(2)
        self.v = np.zeros(2)
        self.goal = np.zeros(2)

    def observe(self):
        return np.concatenate([self.p - self.goal, self.v])

    def set_state(self, p, v, goal):
        self.p = np.array(p, dtype=float)
        self.v = np.array(v, dtype=float)
        self.goal = np.array(goal, dtype=float)
        return self.observe()

    def reset(self, rng):
        self.t = 0
        self.p = rng.uniform(-1.0, 1.0, size=2)
        self.v = np.zeros(2)
        self.goal = rng.uniform(-self.goal_range, self.goal_range, size=2)
        return self.observe()

    def step(self, a):
        a = self._clip_action(a)
        reward = -float(np.linalg.norm(self.p - self.goal)) - 0.01 * float(a @ a)
        v = np.clip(self.v + a * self.dt, -self.max_speed, self.max_speed)
        p = self.p + v * self.dt
        hit = np.abs(p) > 1.0
        self.p = np.clip(p, -1.0, 1.0)
        self.v = np.where(hit, 0.0, v)
        at_goal = (np.linalg.norm(self.p - self.goal) < self.goal_tolerance
                   and np.linalg.norm(self.v) < self.stop_speed)
        return self.observe(), reward, bool(at_goal or self._tick())


class UnitReward(Env):
    """Degenerate task: every episode is one step paying ``reward``."""

    def __init__(self, reward=1.0, max_steps=1):
        super().__init__()
        self.reward = reward
        self.spec = EnvSpec("unit-reward", 2, 1, [-1.0], [1.0], max_steps)

    def reset(self, rng):
        self.t = 0
        return np.array([1.0, 0.0])

    def step(self, a):
        self._clip_action(a)
        return np.array([0.0, 1.0]), float(self.reward), self._tick()


ENVIRONMENTS = {
    "pendulum": Pendulum,
    "reacher2d": Reacher2D,
    "pointmass": PointMass,
    "unit-reward": UnitReward,
}


def make_env(name: str, **overrides) -> Env:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ContractError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return cls(**overrides)
