"""Trajectory recording, expert filtering and training-quartile splits."""

import numpy as np

from terc.data import TrajectoryBatch


class TrainingDiverged(ArithmeticError):
    """A loss or gradient became non-finite; ``partial`` holds what was recorded."""

    def __init__(self, episode, detail="", partial=None):
        super().__init__(f"training diverged at episode {episode}: {detail}".rstrip(": "))
        self.episode = episode
        self.partial = partial


class Recorder:
    def __init__(self, env, seed, **meta):
        self.env = env
        self.seed = seed
        self.meta = meta
        self.eps, self.ts, self.states, self.actions, self.rewards = [], [], [], [], []

    def add(self, ep, t, state, action, reward):
        self.eps.append(ep)
        self.ts.append(t)
        self.states.append(np.asarray(state).copy())
        self.actions.append(action)
        self.rewards.append(reward)

    def batch(self, **extra) -> TrajectoryBatch:
        names = list(self.env.var_names)
        if self.states:
            states = np.array(self.states)
        else:
            states = np.zeros((0, len(names)))
        if self.env.discrete_state:
            states = states.astype(np.int64)
        actions = np.array(self.actions)
        if actions.ndim == 2 and actions.shape[1] == 1:
            actions = actions[:, 0]
        return TrajectoryBatch(
            self.eps, self.ts, states, actions, self.rewards, names,
            self.env.config(), self.seed, {**self.meta, **extra},
        )


def quartile_blocks(ids, blocks=4):
    """Contiguous blocks of episode ids; the remainder goes to the last block."""
    ids = list(ids)
    if len(ids) < blocks:
        raise ValueError(f"need at least {blocks} episodes, got {len(ids)}")
    size = len(ids) // blocks
    cuts = [i * size for i in range(blocks)] + [len(ids)]
    return [ids[cuts[i]:cuts[i + 1]] for i in range(blocks)]


def split_quartile_batches(batch: TrajectoryBatch) -> list:
    out = []
    for q, ids in enumerate(quartile_blocks(batch.episode_ids.tolist())):
        out.append(batch.select_episodes(ids, quartile=q + 1))
    return out


def split_quartiles(batch: TrajectoryBatch) -> list:
    """Four SampleTables, one per contiguous quarter of the episodes."""
    return [b.to_table() for b in split_quartile_batches(batch)]


def expert_filter(batch: TrajectoryBatch, threshold) -> TrajectoryBatch:
    """Keep the episodes whose cumulative reward is at least ``threshold``."""
    rets = batch.returns
    keep = [ep for ep in batch.episode_ids.tolist() if rets[ep] >= threshold]
    return batch.select_episodes(
        keep, expert_threshold=float(threshold), expert_episodes=len(keep), expert_empty=not keep
    )
