"""The Secret Key Game.

Each round shows N integer keys in [0, 10].  Three of them, at positions
fixed for the life of the game, define a quadratic through (1, y1),
(2, y2), (3, y3); the secret is its value at x = 0.  The agent answers
with an integer in [-40, 40] and is paid minus the absolute error.
"""

from dataclasses import dataclass

import numpy as np

from terc.envs.base import Env

KEY_MAX = 10
ACTION_MIN, ACTION_MAX = -40, 40


def skg_secret(y1, y2, y3) -> int:
    """Intercept of the quadratic through (1, y1), (2, y2), (3, y3)."""
    for y in (y1, y2, y3):
        if int(y) != y or not 0 <= y <= KEY_MAX:
            raise ValueError(f"key value {y!r} outside [0, {KEY_MAX}]")
    # Lagrange basis at x = 0: l1 = 3, l2 = -3, l3 = 1
    return 3 * int(y1) - 3 * int(y2) + int(y3)


@dataclass(frozen=True)
class SecretKeyConfig:
    n_keys: int = 10
    secret: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_keys < 3:
            raise ValueError("n_keys must be at least 3")
        if self.secret is not None:
            s = tuple(int(i) for i in self.secret)
            if len(s) != 3 or len(set(s)) != 3 or not all(0 <= i < self.n_keys for i in s):
                raise ValueError(f"secret must be 3 distinct indices below {self.n_keys}, got {self.secret}")
            object.__setattr__(self, "secret", s)

    def secret_indices(self):
        if self.secret is not None:
            return self.secret
        rng = np.random.default_rng([self.seed, 0x5EC])
        return tuple(int(i) for i in rng.choice(self.n_keys, size=3, replace=False))


class SecretKeyGame(Env):
    name = "skg"
    discrete_state = True
    n_actions = ACTION_MAX - ACTION_MIN + 1
    action_values = np.arange(ACTION_MIN, ACTION_MAX + 1)

    def __init__(self, cfg: SecretKeyConfig = SecretKeyConfig(), seed=None):
        super().__init__(cfg.seed if seed is None else seed)
        self.cfg = cfg
        self.secret = cfg.secret_indices()
        self.var_names = [f"X{i + 1}" for i in range(cfg.n_keys)]
        self.keys = None

    @property
    def state_scale(self):
        return np.full(self.cfg.n_keys, float(KEY_MAX))

    @property
    def target(self):
        return skg_secret(*(self.keys[i] for i in self.secret))

    def _reset(self):
        self.keys = self.rng.integers(0, KEY_MAX + 1, size=self.cfg.n_keys)
        return self.keys.copy()

    def _step(self, action):
        if int(action) != action or not ACTION_MIN <= action <= ACTION_MAX:
            raise ValueError(f"action {action!r} outside [{ACTION_MIN}, {ACTION_MAX}]")
        return self.keys.copy(), -abs(int(action) - self.target), True

    def config(self):
        return {
            "name": self.name,
            "n_keys": self.cfg.n_keys,
            "secret": list(self.secret),
            "secret_vars": [self.var_names[i] for i in self.secret],
            "seed": self.seed,
        }
