"""Run configuration files.

INI-style text with sections, read by :mod:`configparser`::

    [run]
    seed = 1

    [env]
    name = ipd
    n = 3
    history = 9

    [agent]
    kind = q
    episodes = 400

    [analysis]
    estimator = plugin
    algorithm = alg2

Values are parsed as int, float, bool or comma lists where they look like
one.  ``TERC_SEED`` in the environment overrides ``[run] seed``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from terc import envs
from terc.estimators import MineConfig
from terc.rl import AcConfig, QConfig
from terc.rl.ppo import PpoConfig
from terc.selection import ToleranceConfig

ENV_NAMES = ("ipd", "skg", "cartpole", "pointmass", "pendulum", "bandit", "chain")
AGENTS = ("q", "ac", "ppo")
ALGORITHMS = ("naive", "alg1", "alg2")
ESTIMATORS = ("plugin", "mine")


class ConfigError(ValueError):
    pass


def _parse(value: str):
    v = value.strip()
    low = v.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", ""):
        return None
    if "," in v:
        return [_parse(p) for p in v.split(",")]
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


@dataclass
class RunConfig:
    seed: int = 0
    env: dict = field(default_factory=dict)
    agent: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    source: str | None = None

    def to_dict(self):
        return {"seed": self.seed, "env": self.env, "agent": self.agent, "analysis": self.analysis}

    @property
    def hash(self):
        return config_hash(self.to_dict())


def config_hash(obj) -> str:
    """64-bit blake2b digest of the canonical JSON form, as 16 hex digits."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


def load_config(path=None, text=None, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    cp = configparser.ConfigParser(interpolation=None)
    try:
        if text is not None:
            cp.read_string(text)
        else:
            if not Path(path).exists():
                raise ConfigError(f"config file {path} does not exist")
            cp.read(path)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse config: {err}") from err
    known = {"run", "env", "agent", "analysis"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    sec = {s: {k: _parse(v) for k, v in cp[s].items()} if cp.has_section(s) else {} for s in known}
    seed = sec["run"].get("seed", 0)
    if "TERC_SEED" in environ:
        seed = environ["TERC_SEED"]
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed: expected an integer, got {seed!r}") from None
    cfg = RunConfig(seed, sec["env"], sec["agent"], sec["analysis"], str(path) if path else None)
    validate(cfg)
    return cfg


def _pick(section, name, keys):
    """Keyword arguments for a dataclass from a config section, with unknown-key errors."""
    out = {}
    for k, v in section.items():
        if k not in keys:
            raise ConfigError(f"{name}.{k}: unknown option")
        out[k] = v
    return out


ENV_KEYS = {
    "ipd": ("n", "history", "rounds"),
    "skg": ("n_keys", "secret"),
    "cartpole": ("doped", "max_steps", "gravity"),
    "pointmass": ("horizon", "gain"),
    "pendulum": ("horizon",),
    "bandit": ("means", "noise"),
    "chain": ("rewards",),
}


def build_env(env: dict, seed: int):
    """Environment from an ``[env]`` section; ``keep`` restricts the observed variables."""
    keep = env.get("keep")
    inner = _build_env({k: v for k, v in env.items() if k != "keep"}, seed)
    if keep is None:
        return inner
    keep = [keep] if isinstance(keep, str) else list(keep)
    try:
        return envs.SubsetEnv(inner, keep)
    except ValueError as err:
        raise ConfigError(f"env.keep: {err}") from err


def _build_env(env: dict, seed: int):
    name = env.get("name")
    if name not in ENV_NAMES:
        raise ConfigError(f"env.name: expected one of {ENV_NAMES}, got {name!r}")
    opts = _pick({k: v for k, v in env.items() if k != "name"}, "env", ENV_KEYS[name])
    try:
        if name == "ipd":
            return envs.IpdEnv(envs.IpdConfig(seed=seed, **opts))
        if name == "skg":
            if "secret" in opts and opts["secret"] is not None:
                opts["secret"] = tuple(opts["secret"])
            return envs.SecretKeyGame(envs.SecretKeyConfig(seed=seed, **opts))
        if name == "bandit" and "means" in opts:
            opts["means"] = tuple(opts["means"])
        if name == "chain" and "rewards" in opts:
            opts["rewards"] = tuple(opts["rewards"])
        cls = {"cartpole": envs.CartPole, "pointmass": envs.PointMass, "pendulum": envs.Pendulum,
               "bandit": envs.Bandit, "chain": envs.Chain}[name]
        return cls(seed=seed, **opts)
    except ValueError as err:
        raise ConfigError(f"env: {err}") from err


AGENT_CONFIGS = {"q": QConfig, "ac": AcConfig, "ppo": PpoConfig}


def build_agent(agent: dict):
    """``(kind, length, config)`` where length is episodes (q, ac) or steps (ppo)."""
    kind = agent.get("kind")
    if kind not in AGENTS:
        raise ConfigError(f"agent.kind: expected one of {AGENTS}, got {kind!r}")
    length_key = "steps" if kind == "ppo" else "episodes"
    length = agent.get(length_key)
    if not isinstance(length, int) or length < 1:
        raise ConfigError(f"agent.{length_key}: expected a positive integer, got {length!r}")
    cls = AGENT_CONFIGS[kind]
    rest = {k: v for k, v in agent.items() if k not in ("kind", length_key)}
    opts = _pick(rest, "agent", cls.__dataclass_fields__)
    try:
        return kind, length, cls(**opts)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"agent: {err}") from err


ANALYSIS_KEYS = {
    "estimator", "algorithm", "tolerance", "epsilon", "runs", "bins", "block", "expert_threshold",
    "hidden", "lr", "batch", "iters", "optimizer", "baseline", "pi_runs", "pi_alpha", "quartiles",
}


def build_analysis(analysis: dict, seed: int):
    opts = _pick(analysis, "analysis", ANALYSIS_KEYS)
    est = opts.get("estimator", "plugin")
    if est not in ESTIMATORS:
        raise ConfigError(f"analysis.estimator: expected one of {ESTIMATORS}, got {est!r}")
    alg = opts.get("algorithm", "alg2")
    if alg not in ALGORITHMS:
        raise ConfigError(f"analysis.algorithm: expected one of {ALGORITHMS}, got {alg!r}")
    block = opts.get("block", "all")
    if block not in ("all", 1, 2, 3, 4):
        raise ConfigError(f"analysis.block: expected all or 1-4, got {block!r}")
    try:
        tol = ToleranceConfig(opts.get("tolerance", "statistical"), opts.get("epsilon", 1e-9))
        mine = MineConfig(
            hidden=opts.get("hidden", 50), lr=opts.get("lr", 0.01), batch=opts.get("batch", 512),
            iters=opts.get("iters", 600), seed=seed, runs=opts.get("runs", 10),
            optimizer=opts.get("optimizer", "adam"),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"analysis: {err}") from err
    return {
        "estimator": est,
        "algorithm": alg,
        "tolerance": tol,
        "mine": mine,
        "runs": mine.runs,
        "bins": opts.get("bins", 32),
        "block": block,
        "expert_threshold": opts.get("expert_threshold"),
        "baseline": opts.get("baseline"),
        "pi_runs": opts.get("pi_runs", 1000),
        "pi_alpha": opts.get("pi_alpha", 0.01),
        "quartiles": bool(opts.get("quartiles", False)),
    }


def validate(cfg: RunConfig):
    if cfg.env:
        build_env(cfg.env, cfg.seed)
    if cfg.agent:
        build_agent(cfg.agent)
    build_analysis(cfg.analysis, cfg.seed)
