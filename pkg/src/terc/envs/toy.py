"""Small environments used to exercise the agents.

``PointMass`` and ``Pendulum`` have continuous actions; ``Bandit`` and
``Chain`` are tiny discrete problems with known answers.
"""

import math

import numpy as np

from terc.envs.base import Env


class PointMass(Env):
    """1-D point that should be steered to the origin; reward -|x| per step."""

    name = "pointmass"
    action_low = np.array([-1.0])
    action_high = np.array([1.0])

    def __init__(self, seed=0, horizon=50, gain=0.1):
        super().__init__(seed)
        self.horizon = horizon
        self.gain = gain
        self.var_names = ["x"]
        self.x = 0.0
        self.t = 0

    def _reset(self):
        self.x = float(self.rng.uniform(-1, 1))
        self.t = 0
        return np.array([self.x])

    def _step(self, action):
        u = float(np.clip(np.ravel(action)[0], -1, 1))
        self.x = float(np.clip(self.x + self.gain * u, -2, 2))
        self.t += 1
        self.truncated = self.t >= self.horizon
        return np.array([self.x]), -abs(self.x), self.truncated

    def config(self):
        return {"name": self.name, "horizon": self.horizon, "gain": self.gain, "seed": self.seed}


class Pendulum(Env):
    """Torque-limited swing-up pendulum (standard textbook dynamics)."""

    name = "pendulum"
    action_low = np.array([-2.0])
    action_high = np.array([2.0])

    def __init__(self, seed=0, horizon=200, g=10.0):
        super().__init__(seed)
        self.horizon = horizon
        self.g = g
        self.m = 1.0
        self.l = 1.0
        self.dt = 0.05
        self.max_speed = 8.0
        self.var_names = ["cos", "sin", "theta_dot"]
        self.th = 0.0
        self.thdot = 0.0
        self.t = 0

    @property
    def state_scale(self):
        return np.array([1.0, 1.0, self.max_speed])

    def _obs(self):
        return np.array([math.cos(self.th), math.sin(self.th), self.thdot])

    def _reset(self):
        self.th = float(self.rng.uniform(-math.pi, math.pi))
        self.thdot = float(self.rng.uniform(-1, 1))
        self.t = 0
        return self._obs()

    def _step(self, action):
        u = float(np.clip(np.ravel(action)[0], -2, 2))
        ang = ((self.th + math.pi) % (2 * math.pi)) - math.pi
        cost = ang ** 2 + 0.1 * self.thdot ** 2 + 0.001 * u ** 2
        self.thdot += (3 * self.g / (2 * self.l) * math.sin(self.th) + 3.0 / (self.m * self.l ** 2) * u) * self.dt
        self.thdot = float(np.clip(self.thdot, -self.max_speed, self.max_speed))
        self.th += self.thdot * self.dt
        self.t += 1
        self.truncated = self.t >= self.horizon
        return self._obs(), -cost, self.truncated

    def config(self):
        return {"name": self.name, "horizon": self.horizon, "g": self.g, "seed": self.seed}


class Bandit(Env):
    """Single-step problem with fixed mean rewards per arm and Gaussian noise."""

    name = "bandit"

    def __init__(self, means=(0.0, 1.0, 0.2), noise=0.1, seed=0):
        super().__init__(seed)
        self.means = np.asarray(means, dtype=float)
        self.noise = noise
        self.n_actions = len(self.means)
        self.action_values = np.arange(self.n_actions)
        self.var_names = ["s"]

    def _reset(self):
        return np.zeros(1)

    def _step(self, action):
        r = self.means[int(action)] + self.noise * self.rng.normal()
        return np.zeros(1), r, True

    def config(self):
        return {"name": self.name, "means": self.means.tolist(), "noise": self.noise, "seed": self.seed}


class Chain(Env):
    """Deterministic two-state chain s0 -> s1 -> end with fixed rewards.

    The analytic values are v(s1) = r1 and v(s0) = r0 + gamma * r1.
    """

    name = "chain"
    n_actions = 1
    action_values = np.array([0])

    def __init__(self, rewards=(1.0, 2.0), seed=0):
        super().__init__(seed)
        self.rewards = tuple(float(r) for r in rewards)
        self.var_names = ["s0", "s1"]
        self.pos = 0

    def _onehot(self):
        return np.eye(2)[self.pos] if self.pos < 2 else np.zeros(2)

    def _reset(self):
        self.pos = 0
        return self._onehot()

    def _step(self, action):
        r = self.rewards[self.pos]
        self.pos += 1
        return self._onehot(), r, self.pos >= 2

    def config(self):
        return {"name": self.name, "rewards": list(self.rewards), "seed": self.seed}
