"""Desk-scale agents and trajectory utilities."""

from terc.rl.actor_critic import AcConfig, train_actor_critic
from terc.rl.qlearning import QConfig, QTable, train_q
from terc.rl.recording import (
    Recorder, TrainingDiverged, expert_filter, quartile_blocks, split_quartile_batches, split_quartiles,
)

__all__ = [
    "AcConfig", "train_actor_critic", "QConfig", "QTable", "train_q", "Recorder",
    "TrainingDiverged", "expert_filter", "quartile_blocks", "split_quartile_batches", "split_quartiles",
]
