"""Environments and dataset generators."""

from terc.envs.base import Env, SubsetEnv
from terc.envs.cartpole import CartPole
from terc.envs.ipd import C, D, IpdConfig, IpdEnv, pair_code, tfnt_policy
from terc.envs.skg import SecretKeyConfig, SecretKeyGame, skg_secret
from terc.envs.synthetic import KINDS, SyntheticSpec, gen_synthetic
from terc.envs.toy import Bandit, Chain, Pendulum, PointMass

__all__ = [
    "Env", "SubsetEnv", "CartPole", "C", "D", "IpdConfig", "IpdEnv", "pair_code", "tfnt_policy",
    "SecretKeyConfig", "SecretKeyGame", "skg_secret", "KINDS", "SyntheticSpec",
    "gen_synthetic", "Bandit", "Chain", "Pendulum", "PointMass",
]
