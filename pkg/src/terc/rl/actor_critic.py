"""One-step temporal-difference actor-critic with a softmax policy.

Per step, with delta = r + gamma * v(s') - v(s) (v(s') = 0 at a terminal):

    critic  w     <- w     + lr_c * delta * grad v(s)
    actor   theta <- theta + lr_a * gamma^t * delta * grad log pi(a|s)

An optional entropy bonus ``entropy_coef * grad H(pi(.|s))`` (off by
default) keeps the softmax from collapsing onto one action early in
training on large action spaces.
"""

from dataclasses import dataclass

import numpy as np

from terc.neural import Layout, NonFiniteError, mlp_forward, mlp_grad, mlp_init, opt_init, opt_step
from terc.rl.recording import Recorder, TrainingDiverged


@dataclass(frozen=True)
class AcConfig:
    hidden: int = 64
    activation: str = "relu"
    gamma: float = 0.99
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    optimizer: str = "sgd"
    discount_actor: bool = True
    entropy_coef: float = 0.0

    def __post_init__(self):
        if self.actor_lr < 0 or self.critic_lr < 0:
            raise ValueError("learning rates must be non-negative")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if self.entropy_coef < 0:
            raise ValueError("entropy_coef must be non-negative")


class _Learner:
    """Parameters plus optimiser state; a zero learning rate freezes the network."""

    def __init__(self, params, kind, lr):
        self.params = params
        self.state = opt_init(params, kind, lr) if lr > 0 else None

    def step(self, grad):
        if self.state is not None:
            self.params, self.state = opt_step(self.params, grad, self.state)


def train_actor_critic(env, episodes, accfg: AcConfig = AcConfig(), seed=0):
    """Returns ``({"actor": ..., "critic": ...}, TrajectoryBatch)``."""
    if not env.discrete_actions:
        raise ValueError("the actor-critic agent needs a discrete action space")
    rng = np.random.default_rng(seed)
    scale = env.state_scale
    n_in = env.state_dim
    actor = _Learner(
        mlp_init(Layout.simple(n_in, accfg.hidden, env.n_actions, accfg.activation, "softmax"), seed),
        accfg.optimizer, accfg.actor_lr,
    )
    critic = _Learner(
        mlp_init(Layout.simple(n_in, accfg.hidden, 1, accfg.activation, "linear"), seed + 1),
        accfg.optimizer, accfg.critic_lr,
    )
    rec = Recorder(env, seed, agent="actor-critic", agent_config=accfg.__dict__)
    for ep in range(episodes):
        s = env.reset()
        x = s / scale
        t, done = 0, False
        while not done:
            probs = mlp_forward(actor.params, x)
            a = int(rng.choice(env.n_actions, p=probs / probs.sum()))
            s2, r, done = env.step(env.action_values[a])
            rec.add(ep, t, s, env.action_values[a], r)
            x2 = s2 / scale
            v = mlp_forward(critic.params, x)[0]
            v2 = 0.0 if done and not env.truncated else mlp_forward(critic.params, x2)[0]
            delta = r + accfg.gamma * v2 - v
            try:
                # mse with weight 1/2 has gradient (v - target) grad v = -delta grad v
                _, gc = mlp_grad(critic.params, x[None], [[v + delta]], "mse", weights=[0.5])
                w = delta * (accfg.gamma ** t if accfg.discount_actor else 1.0)
                wm = np.zeros((1, env.n_actions))
                wm[0, a] = w
                if accfg.entropy_coef:
                    # a fixed soft weight c * (-p log p) has the entropy gradient
                    wm[0] += accfg.entropy_coef * (-probs * np.log(np.maximum(probs, 1e-300)))
                _, ga = mlp_grad(actor.params, x[None], None, "pg-weighted-log-prob", weights=wm)
                critic.step(gc)
                actor.step(ga)
            except NonFiniteError as err:
                raise TrainingDiverged(ep, str(err), rec.batch(diverged_episode=ep)) from err
            x, s = x2, s2
            t += 1
    return {"actor": actor.params, "critic": critic.params}, rec.batch()
