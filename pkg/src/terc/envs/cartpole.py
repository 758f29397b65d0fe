"""Cart-pole balancing with extra random state components.

Standard cart-pole equations (Euler step, 0.02 s) with a push of +/-10 N.
Three "doped" variables, drawn uniform on [-5, 5] at every step, are
appended to the four physical components; they carry no information about
anything.
"""

import math

import numpy as np

from terc.envs.base import Env


class CartPole(Env):
    name = "cartpole"
    n_actions = 2
    action_values = np.array([0, 1])

    def __init__(self, seed=0, doped=3, gravity=9.8, max_steps=500, dope_range=5.0):
        super().__init__(seed)
        self.gravity = gravity
        self.masscart = 1.0
        self.masspole = 0.1
        self.length = 0.5  # half the pole length
        self.force_mag = 10.0
        self.tau = 0.02
        self.theta_limit = 12 * 2 * math.pi / 360
        self.x_limit = 2.4
        self.max_steps = max_steps
        self.doped = doped
        self.dope_range = dope_range
        self.var_names = ["x", "x_dot", "theta", "theta_dot"] + [f"R{i + 1}" for i in range(doped)]
        self.phys = np.zeros(4)
        self.t = 0

    @property
    def state_scale(self):
        return np.array([2.4, 3.0, 0.21, 3.0] + [self.dope_range] * self.doped)

    def _obs(self):
        noise = self.rng.uniform(-self.dope_range, self.dope_range, size=self.doped)
        return np.concatenate([self.phys, noise])

    def _reset(self):
        self.phys = self.rng.uniform(-0.05, 0.05, size=4)
        self.t = 0
        return self._obs()

    def dynamics(self, state, force):
        """One Euler step of the cart-pole equations of motion."""
        x, x_dot, theta, theta_dot = state
        total = self.masspole + self.masscart
        pml = self.masspole * self.length
        cos, sin = math.cos(theta), math.sin(theta)
        temp = (force + pml * theta_dot ** 2 * sin) / total
        theta_acc = (self.gravity * sin - cos * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * cos ** 2 / total)
        )
        x_acc = temp - pml * theta_acc * cos / total
        return np.array([
            x + self.tau * x_dot,
            x_dot + self.tau * x_acc,
            theta + self.tau * theta_dot,
            theta_dot + self.tau * theta_acc,
        ])

    def _step(self, action):
        if action not in (0, 1):
            raise ValueError(f"cartpole action must be 0 or 1, got {action!r}")
        force = self.force_mag if action == 1 else -self.force_mag
        self.phys = self.dynamics(self.phys, force)
        self.t += 1
        x, theta = self.phys[0], self.phys[2]
        fell = abs(x) > self.x_limit or abs(theta) > self.theta_limit
        self.truncated = not fell and self.t >= self.max_steps
        return self._obs(), 1.0, fell or self.truncated

    def config(self):
        return {
            "name": self.name,
            "doped": self.doped,
            "dope_range": self.dope_range,
            "gravity": self.gravity,
            "max_steps": self.max_steps,
            "seed": self.seed,
        }
