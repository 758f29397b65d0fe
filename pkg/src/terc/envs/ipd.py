"""Iterated prisoner's dilemma against a Tit-For-N-Tats opponent.

The state is the last ``l`` (agent, opponent) move pairs, most recent
first, each coded (C,C)=0, (D,C)=1, (C,D)=2, (D,D)=3.  Episodes start from
an all-cooperate history.
"""

from dataclasses import dataclass, field

import numpy as np

from terc.envs.base import Env

C, D = 0, 1
MOVES = {"C": C, "D": D, C: C, D: D}
PAIR_CODES = {"CC": 0, "DC": 1, "CD": 2, "DD": 3}
# payoff[agent][opponent] -> (agent reward, opponent reward)
DEFAULT_PAYOFF = ((2, 2), (0, 3), (3, 0), (1, 1))


def pair_code(agent, opponent) -> int:
    return MOVES[agent] + 2 * MOVES[opponent]


def tfnt_policy(history, n) -> int:
    """Opponent move: defect iff the agent's last ``n`` moves were all defections."""
    history = [MOVES[m] for m in history]
    if len(history) >= n and all(m == D for m in history[-n:]):
        return D
    return C


@dataclass(frozen=True)
class IpdConfig:
    n: int = 3
    history: int = 2
    rounds: int = 100
    # flattened (CC, CD, DC, DD) rows from the agent's point of view
    payoff: tuple = DEFAULT_PAYOFF
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n (opponent patience) must be >= 1")
        if self.history < 1:
            raise ValueError("history length l must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        pay = tuple(tuple(p) for p in self.payoff)
        if len(pay) != 4 or any(len(p) != 2 or min(p) < 0 for p in pay):
            raise ValueError("payoff needs four non-negative (agent, opponent) pairs")
        object.__setattr__(self, "payoff", pay)

    def reward(self, agent, opponent):
        return self.payoff[2 * agent + opponent]


class IpdEnv(Env):
    name = "ipd"
    discrete_state = True
    n_actions = 2
    action_values = np.array([C, D])

    def __init__(self, cfg: IpdConfig = IpdConfig(), seed=None):
        super().__init__(cfg.seed if seed is None else seed)
        self.cfg = cfg
        self.var_names = [f"X{i + 1}" for i in range(cfg.history)]
        self.moves = []
        self.window = None
        self.t = 0

    @property
    def state_scale(self):
        return np.full(self.cfg.history, 3.0)

    def _reset(self):
        self.moves = []
        self.window = np.zeros(self.cfg.history, dtype=np.int64)
        self.t = 0
        return self.window.copy()

    def _step(self, action):
        if action not in MOVES:
            raise ValueError(f"invalid move {action!r}; use 0/1 or 'C'/'D'")
        a = MOVES[action]
        o = tfnt_policy(self.moves, self.cfg.n)
        self.moves.append(a)
        self.last_opponent = o
        self.window = np.roll(self.window, 1)
        self.window[0] = pair_code(a, o)
        self.t += 1
        # the game itself never ends; the round limit only chops it into episodes
        self.truncated = self.t >= self.cfg.rounds
        return self.window.copy(), self.cfg.reward(a, o)[0], self.truncated

    def config(self):
        return {
            "name": self.name,
            "n": self.cfg.n,
            "history": self.cfg.history,
            "rounds": self.cfg.rounds,
            "payoff": [list(p) for p in self.cfg.payoff],
            "pair_codes": PAIR_CODES,
            "seed": self.seed,
        }
