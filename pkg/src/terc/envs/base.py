"""Minimal environment protocol shared by the agents.

An environment exposes ``reset() -> state`` and
``step(action) -> (state, reward, done)`` plus a few descriptors.  Discrete
action environments take the action *value* from ``action_values``; agents
choose an index into that array.
"""

import numpy as np


class Env:
    name = "env"
    var_names: list = []
    discrete_state = False
    # number of discrete actions, or None for a continuous action box
    n_actions = None
    action_values = None
    action_low = None
    action_high = None
    # set by step(): True when ``done`` was a time limit rather than a terminal state
    truncated = False

    def __init__(self, seed=0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._done = True

    @property
    def state_dim(self):
        return len(self.var_names)

    @property
    def discrete_actions(self):
        return self.n_actions is not None

    @property
    def state_scale(self):
        """Per-component divisor that brings raw states to roughly unit range."""
        return np.ones(self.state_dim)

    def reset(self):
        self._done = False
        return self._reset()

    def step(self, action):
        if self._done:
            raise RuntimeError(f"{self.name}: step() called on a finished episode; call reset() first")
        self.truncated = False
        state, reward, done = self._step(action)
        self._done = bool(done)
        return state, float(reward), bool(done)

    def config(self) -> dict:
        return {"name": self.name, "seed": self.seed}

    def _reset(self):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError


class SubsetEnv(Env):
    """Restricts another environment's observation to the named state variables.

    Dynamics, rewards and actions are the wrapped environment's; only the
    state the agent sees shrinks.  Used to retrain on a selected subset.
    """

    def __init__(self, env: Env, keep):
        keep = list(keep)
        unknown = [k for k in keep if k not in env.var_names]
        if unknown or not keep:
            raise ValueError(f"cannot keep {keep} from variables {env.var_names}")
        self.inner = env
        self.seed = env.seed
        self.rng = env.rng
        self._done = True
        self._idx = np.array([env.var_names.index(k) for k in keep])
        self.var_names = keep
        self.name = env.name
        self.discrete_state = env.discrete_state
        self.n_actions = env.n_actions
        self.action_values = env.action_values
        self.action_low = env.action_low
        self.action_high = env.action_high

    @property
    def state_scale(self):
        return np.asarray(self.inner.state_scale)[self._idx]

    def _reset(self):
        return np.asarray(self.inner.reset())[self._idx]

    def _step(self, action):
        state, reward, done = self.inner.step(action)
        self.truncated = self.inner.truncated
        return np.asarray(state)[self._idx], reward, done

    def config(self):
        return {**self.inner.config(), "observed": list(self.var_names)}
