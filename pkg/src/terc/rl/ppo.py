"""Proximal policy optimisation with a clipped surrogate.

Rollouts of ``horizon`` steps are collected with the current policy, then
the actor and critic take ``epochs`` passes of shuffled minibatches.  The
actor loss per sample is

    -min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A) - c * entropy

whose gradient with respect to log pi is ``-ratio * A`` where the
unclipped branch is active and 0 elsewhere.  Advantages use generalised
advantage estimation.

After each window the trained actor is blended with the pre-window actor,
``theta <- old + f * (trained - old)`` with ``f = surrogate_factor``; the
blended weights then act as the old policy of the next window.  Setting
the factor to 1 turns the blend off.
"""

import math
from dataclasses import dataclass

import numpy as np

from terc.neural import (
    Layout, MlpParams, NonFiniteError, _log_softmax, _forward, mlp_forward, mlp_grad, mlp_init,
    opt_init, opt_step,
)
from terc.rl.recording import Recorder, TrainingDiverged


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    lr: float = 3e-4
    clip: float = 0.2
    minibatch: int = 64
    horizon: int = 2048
    epochs: int = 10
    entropy_coef: float = 0.001
    hidden: int = 64
    activation: str = "tanh"
    surrogate_factor: float = 0.95
    gae_lambda: float = 0.95
    init_log_std: float = 0.0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0 < self.clip < 1:
            raise ValueError("clip must lie in (0, 1)")
        if self.minibatch < 1 or self.horizon < 1 or self.epochs < 1:
            raise ValueError("minibatch, horizon and epochs must be >= 1")
        if not 0 < self.surrogate_factor <= 1:
            raise ValueError("surrogate_factor must lie in (0, 1]")
        if not 0 <= self.gae_lambda <= 1 or not 0 <= self.gamma <= 1:
            raise ValueError("gamma and gae_lambda must lie in [0, 1]")


def clipped_weight(ratio, adv, clip):
    """d(surrogate)/d(log pi): ratio * A where the unclipped branch is selected, else 0."""
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(adv, dtype=float)
    active = np.where(adv >= 0, ratio <= 1 + clip, ratio >= 1 - clip)
    return np.where(active, ratio * adv, 0.0)


def clipped_objective(ratio, adv, clip):
    ratio = np.asarray(ratio, dtype=float)
    return np.minimum(ratio * adv, np.clip(ratio, 1 - clip, 1 + clip) * adv)


def _std_params(dim, value):
    # a bias-only linear layer holds the state-independent log standard deviation
    return MlpParams(Layout((1, dim), ("linear",)), [np.zeros((dim, 1))], [np.full(dim, float(value))])


class _Policy:
    def __init__(self, env, cfg, seed):
        self.discrete = env.discrete_actions
        n_out = env.n_actions if self.discrete else len(env.action_low)
        head = "softmax" if self.discrete else "linear"
        self.net = mlp_init(Layout.simple(env.state_dim, cfg.hidden, n_out, cfg.activation, head), seed)
        self.log_std = None if self.discrete else _std_params(n_out, cfg.init_log_std)

    def params(self):
        out = {"actor": self.net}
        if self.log_std is not None:
            out["log_std"] = self.log_std
        return out

    def log_prob(self, x, a):
        zs, acts = _forward(self.net, x)
        if self.discrete:
            return _log_softmax(zs[-1])[np.arange(len(x)), a.astype(np.int64)]
        mu = acts[-1]
        ls = self.log_std.biases[0]
        z = (a - mu) / np.exp(ls)
        return np.sum(-0.5 * z ** 2 - ls - 0.5 * math.log(2 * math.pi), axis=1)

    def sample(self, x, rng):
        if self.discrete:
            p = mlp_forward(self.net, x)
            return int(rng.choice(len(p), p=p / p.sum()))
        mu = mlp_forward(self.net, x)
        return mu + np.exp(self.log_std.biases[0]) * rng.normal(size=mu.shape)

    def grads(self, x, a, w, coef):
        """Gradients of -mean(w * log pi(a|x)) - coef * mean entropy."""
        n = len(x)
        if self.discrete:
            p = mlp_forward(self.net, x)
            wm = np.zeros_like(p)
            wm[np.arange(n), a.astype(np.int64)] = w
            # entropy term enters as a soft target weight c * (-p log p)
            wm += coef * (-p * np.log(np.maximum(p, 1e-300)))
            _, g = mlp_grad(self.net, x, None, "pg-weighted-log-prob", weights=wm)
            return {"actor": g}
        ls = self.log_std.biases[0]
        var = np.exp(2 * ls)
        # d(-w log pi)/d mu = w (mu - a) / var; an mse target of mu - (mu - a) / (2 var)
        # reproduces that gradient exactly (the returned loss value is not used)
        mus = mlp_forward(self.net, x)
        _, g = mlp_grad(self.net, x, mus - (mus - a) / (2 * var), "mse", weights=w)
        resid2 = (a - mus) ** 2 / var
        gls = -np.mean(w[:, None] * (resid2 - 1.0), axis=0) - coef
        gstd = self.log_std.zeros_like()
        gstd.biases[0] = gls
        return {"actor": g, "log_std": gstd}


def _gae(rewards, values, next_values, ends, boots, gamma, lam):
    adv = np.zeros(len(rewards))
    last = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        if ends[i]:
            last = 0.0
        nv = next_values[i] if boots[i] else 0.0
        delta = rewards[i] + gamma * nv - values[i]
        last = delta + gamma * lam * last
        adv[i] = last
    return adv


def train_ppo(env, steps, cfg: PpoConfig = PpoConfig(), seed=0):
    """Returns ``(networks, TrajectoryBatch)``; the batch meta holds per-window diagnostics."""
    rng = np.random.default_rng(seed)
    scale = env.state_scale
    pol = _Policy(env, cfg, seed)
    critic = mlp_init(Layout.simple(env.state_dim, cfg.hidden, 1, cfg.activation, "linear"), seed + 1)
    opts = {k: opt_init(v, "adam", cfg.lr) for k, v in pol.params().items()}
    copt = opt_init(critic, "adam", cfg.lr)
    rec = Recorder(env, seed, agent="ppo", agent_config=cfg.__dict__)
    first_ratio_dev = []

    ep, t = 0, 0
    s = env.reset()
    done_steps = 0
    while done_steps < steps:
        n = min(cfg.horizon, steps - done_steps)
        xs, acts, rews, ends, boots, nxt = [], [], [], [], [], []
        for _ in range(n):
            x = s / scale
            a = pol.sample(x, rng)
            env_a = env.action_values[a] if pol.discrete else np.clip(a, env.action_low, env.action_high)
            s2, r, done = env.step(env_a)
            rec.add(ep, t, s, env_a if pol.discrete else a, r)
            xs.append(x)
            acts.append(a)
            rews.append(r)
            nxt.append(s2 / scale)
            ends.append(done)
            boots.append(not done or env.truncated)
            t += 1
            if done:
                ep += 1
                t = 0
                s = env.reset()
            else:
                s = s2
        done_steps += n
        # treat the cut at the end of the window as a bootstrapped boundary
        ends[-1] = True
        X = np.array(xs)
        A = np.array(acts) if pol.discrete else np.array(acts).reshape(n, -1)
        R = np.array(rews)
        v = mlp_forward(critic, X)[:, 0]
        v2 = mlp_forward(critic, np.array(nxt))[:, 0]
        adv = _gae(R, v, v2, np.array(ends), np.array(boots), cfg.gamma, cfg.gae_lambda)
        ret = adv + v
        old = {k: p.copy() for k, p in pol.params().items()}
        logp_old = pol.log_prob(X, A)
        first_ratio_dev.append(float(np.max(np.abs(np.exp(pol.log_prob(X, A) - logp_old) - 1.0))))
        try:
            for _ in range(cfg.epochs):
                order = rng.permutation(n)
                for lo in range(0, n, cfg.minibatch):
                    idx = order[lo:lo + cfg.minibatch]
                    xb, ab = X[idx], A[idx]
                    advb = adv[idx]
                    if len(idx) > 1:
                        advb = (advb - advb.mean()) / (advb.std() + 1e-8)
                    ratio = np.exp(pol.log_prob(xb, ab) - logp_old[idx])
                    w = clipped_weight(ratio, advb, cfg.clip)
                    grads = pol.grads(xb, ab, w, cfg.entropy_coef)
                    for k, g in grads.items():
                        p, opts[k] = opt_step(getattr(pol, "net" if k == "actor" else k), g, opts[k])
                        setattr(pol, "net" if k == "actor" else k, p)
                    _, gc = mlp_grad(critic, xb, ret[idx][:, None], "mse")
                    critic, copt = opt_step(critic, gc, copt)
        except NonFiniteError as err:
            raise TrainingDiverged(ep, str(err), rec.batch(diverged_episode=ep)) from err
        f = cfg.surrogate_factor
        if f < 1:
            pol.net = old["actor"].combine(pol.net, lambda o, c: o + f * (c - o))
            if pol.log_std is not None:
                pol.log_std = old["log_std"].combine(pol.log_std, lambda o, c: o + f * (c - o))
    nets = {**pol.params(), "critic": critic}
    return nets, rec.batch(first_ratio_deviation=first_ratio_dev)
