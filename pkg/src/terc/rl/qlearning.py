"""Tabular Q-learning with a linearly decaying epsilon-greedy policy."""

from dataclasses import dataclass

import numpy as np

from terc.rl.recording import Recorder


@dataclass(frozen=True)
class QConfig:
    alpha: float = 0.9
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_decay_steps: int = 40000
    eps_min: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0 <= self.eps_min <= self.eps_start <= 1:
            raise ValueError("need 0 <= eps_min <= eps_start <= 1")
        if self.eps_decay_steps < 1:
            raise ValueError("eps_decay_steps must be >= 1")

    def epsilon(self, step):
        return max(self.eps_min, self.eps_start - step / self.eps_decay_steps * self.eps_start)


class QTable:
    """Action values keyed by the tuple of discrete state components."""

    def __init__(self, n_actions):
        self.n_actions = n_actions
        self.values = {}

    @staticmethod
    def key(state):
        return tuple(int(v) for v in np.ravel(state))

    def get(self, state):
        return self.values.get(self.key(state), np.zeros(self.n_actions))

    def row(self, state):
        k = self.key(state)
        if k not in self.values:
            self.values[k] = np.zeros(self.n_actions)
        return self.values[k]

    def greedy(self, state):
        return int(np.argmax(self.get(state)))

    def to_dict(self):
        return {",".join(map(str, k)): v.tolist() for k, v in sorted(self.values.items())}


def _choose(q, eps, rng):
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(len(q)))
    best = np.flatnonzero(q == q.max())
    return int(best[0]) if len(best) == 1 else int(rng.choice(best))


def train_q(env, episodes, qcfg: QConfig = QConfig(), seed=0):
    """Run ``episodes`` episodes of Q-learning; returns ``(QTable, TrajectoryBatch)``."""
    if not env.discrete_actions:
        raise ValueError("tabular Q-learning needs a discrete action space")
    if not env.discrete_state:
        raise ValueError("tabular Q-learning needs a discrete state encoding")
    rng = np.random.default_rng(seed)
    table = QTable(env.n_actions)
    rec = Recorder(env, seed, agent="q", agent_config=qcfg.__dict__)
    step = 0
    for ep in range(episodes):
        s = env.reset()
        t, done = 0, False
        while not done:
            q = table.row(s)
            a = _choose(q, qcfg.epsilon(step), rng)
            s2, r, done = env.step(env.action_values[a])
            rec.add(ep, t, s, env.action_values[a], r)
            boot = 0.0 if done and not env.truncated else qcfg.gamma * table.get(s2).max()
            q[a] += qcfg.alpha * (r + boot - q[a])
            s = s2
            t += 1
            step += 1
    return table, rec.batch(steps=step)
