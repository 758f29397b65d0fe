"""A small dense feed-forward network with hand-written reverse mode.

Shared by the neural MI estimator and the actor-critic / PPO agents.  Only
four scalar losses are differentiated:

``mse``
    mean over rows of ``w * ||out - target||^2`` (``w`` defaults to 1).
``neg-log-likelihood``
    mean of ``-log p[target]`` for a softmax head.
``pg-weighted-log-prob``
    mean over rows of ``-sum_k W[b, k] log p[b, k]`` for a softmax head;
    integer targets with per-row weights are the usual one-hot special case.
``dv-objective``
    negated Donsker-Varadhan bound ``-(mean F(joint) - log mean exp F(marginal))``
    for a scalar linear head.

Arrays are float64 throughout.  Rows are samples; weight matrices are
stored ``(out, in)``.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear", "softmax")
LOSSES = ("mse", "neg-log-likelihood", "dv-objective", "pg-weighted-log-prob")

CHECKPOINT_FORMAT = "terc-mlp"
CHECKPOINT_VERSION = 1


class NonFiniteError(ArithmeticError):
    """Raised when a forward pass, loss or gradient stops being finite."""


@dataclass(frozen=True)
class Layout:
    layer_sizes: tuple
    activations: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        acts = tuple(self.activations)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", acts)
        if len(sizes) < 2:
            raise ValueError(f"a layout needs at least 2 layers, got {len(sizes)}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive: {sizes}")
        if len(acts) != len(sizes) - 1:
            raise ValueError(
                f"expected {len(sizes) - 1} activations for sizes {sizes}, got {len(acts)}"
            )
        for i, a in enumerate(acts):
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
            if a == "softmax" and i != len(acts) - 1:
                raise ValueError("softmax is only allowed on the final layer")

    @classmethod
    def simple(cls, n_in, hidden, n_out, hidden_act="relu", out_act="linear"):
        """One-hidden-layer layout, the only shape the experiments use."""
        return cls((n_in, hidden, n_out), (hidden_act, out_act))

    @property
    def n_in(self):
        return self.layer_sizes[0]

    @property
    def n_out(self):
        return self.layer_sizes[-1]


@dataclass
class MlpParams:
    layout: Layout
    weights: list
    biases: list

    def copy(self):
        return MlpParams(self.layout, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self):
        return MlpParams(
            self.layout,
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
        )

    def arrays(self):
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def to_vector(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def from_vector(cls, layout, vec):
        vec = np.asarray(vec, dtype=np.float64)
        weights, biases, pos = [], [], 0
        for n_in, n_out in zip(layout.layer_sizes[:-1], layout.layer_sizes[1:]):
            weights.append(vec[pos:pos + n_out * n_in].reshape(n_out, n_in).copy())
            pos += n_out * n_in
            biases.append(vec[pos:pos + n_out].copy())
            pos += n_out
        if pos != vec.size:
            raise ValueError(f"vector has {vec.size} entries, layout needs {pos}")
        return cls(layout, weights, biases)

    def combine(self, other, fn):
        """Elementwise ``fn(self_array, other_array)`` into a new MlpParams."""
        return MlpParams(
            self.layout,
            [fn(a, b) for a, b in zip(self.weights, other.weights)],
            [fn(a, b) for a, b in zip(self.biases, other.biases)],
        )

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def mlp_init(layout: Layout, seed: int) -> MlpParams:
    """Glorot-uniform weights, zero biases, from ``default_rng(seed)``."""
    if not isinstance(layout, Layout):
        layout = Layout(*layout)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(layout.layer_sizes[:-1], layout.layer_sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return MlpParams(layout, weights, biases)


def _activate(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "linear":
        return z
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.layout.n_in:
        raise ValueError(
            f"input has shape {np.shape(x)}, network expects {params.layout.n_in} features"
        )
    return x, single


def _forward(params, x):
    """Return (pre-activations, activations); activations[0] is the input."""
    zs, acts = [], [x]
    a = x
    for i, (w, b, kind) in enumerate(zip(params.weights, params.biases, params.layout.activations)):
        z = a @ w.T + b
        a = _activate(kind, z)
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"non-finite activation in layer {i} ({kind})")
        zs.append(z)
        acts.append(a)
    return zs, acts


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Evaluate the network on one input vector or a batch of rows."""
    xb, single = _as_batch(params, x)
    _, acts = _forward(params, xb)
    out = acts[-1]
    return out[0] if single else out


def _backward(params, zs, acts, dz_last):
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    dz = dz_last
    for i in range(len(params.weights) - 1, -1, -1):
        grads_w[i] = dz.T @ acts[i]
        grads_b[i] = dz.sum(axis=0)
        if i == 0:
            break
        da = dz @ params.weights[i]
        kind = params.layout.activations[i - 1]
        if kind == "relu":
            dz = da * (zs[i - 1] > 0.0)
        elif kind == "tanh":
            dz = da * (1.0 - acts[i] ** 2)
        else:
            dz = da
    return MlpParams(params.layout, grads_w, grads_b)


def _through_head(kind, z, a, dout):
    """Chain dL/d(output) back through the final activation."""
    if kind == "linear":
        return dout
    if kind == "relu":
        return dout * (z > 0.0)
    if kind == "tanh":
        return dout * (1.0 - a ** 2)
    return a * (dout - np.sum(dout * a, axis=1, keepdims=True))


def _row_weights(weights, n):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != n:
        raise ValueError(f"{w.shape[0]} sample weights for {n} rows")
    return w


def mlp_grad(params: MlpParams, x, y=None, loss: str = "mse", *, weights=None, x_marginal=None):
    """Loss value and exact gradient of ``loss`` with respect to the parameters.

    ``x`` holds the input rows (the joint rows for ``dv-objective``).  ``y``
    is the regression target for ``mse`` and integer class / action indices
    for the softmax losses.  ``weights`` are per-row multipliers for ``mse``
    and ``pg-weighted-log-prob``; the latter also accepts a full
    ``(rows, classes)`` matrix in place of ``y``.  ``x_marginal`` holds the
    product-of-marginals rows for ``dv-objective``.
    """
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}; choose from {LOSSES}")
    xb, _ = _as_batch(params, x)
    n = xb.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    head = params.layout.activations[-1]

    if loss == "dv-objective":
        if x_marginal is None:
            raise ValueError("dv-objective needs x_marginal rows")
        if params.layout.n_out != 1 or head != "linear":
            raise ValueError("dv-objective needs a single linear output")
        xm, _ = _as_batch(params, x_marginal)
        zj, aj = _forward(params, xb)
        zm, am = _forward(params, xm)
        fj = aj[-1][:, 0]
        fm = am[-1][:, 0]
        top = fm.max()
        lme = top + np.log(np.mean(np.exp(fm - top)))
        value = -(fj.mean() - lme)
        soft = np.exp(fm - top)
        soft /= soft.sum()
        gj = _backward(params, zj, aj, np.full((n, 1), -1.0 / n))
        gm = _backward(params, zm, am, soft[:, None])
        grads = gj.combine(gm, np.add)
        return _checked(value, grads)

    zs, acts = _forward(params, xb)
    out = acts[-1]

    if loss == "mse":
        target = np.asarray(y, dtype=np.float64).reshape(n, -1)
        if target.shape[1] != out.shape[1]:
            raise ValueError(f"target width {target.shape[1]} != output width {out.shape[1]}")
        w = _row_weights(weights, n)
        resid = out - target
        value = float(np.mean(w * np.sum(resid ** 2, axis=1)))
        dout = 2.0 * resid * w[:, None] / n
        dz = _through_head(head, zs[-1], out, dout)
        return _checked(value, _backward(params, zs, acts, dz))

    if head != "softmax":
        raise ValueError(f"{loss} needs a softmax output layer")
    logp = _log_softmax(zs[-1])
    k = out.shape[1]
    if loss == "neg-log-likelihood":
        idx = np.asarray(y, dtype=np.int64).reshape(-1)
        target = np.zeros((n, k))
        target[np.arange(n), idx] = 1.0
    else:
        if y is None:
            target = np.asarray(weights, dtype=np.float64)
            if target.shape != (n, k):
                raise ValueError(f"weight matrix must have shape {(n, k)}")
        else:
            idx = np.asarray(y, dtype=np.int64).reshape(-1)
            target = np.zeros((n, k))
            target[np.arange(n), idx] = _row_weights(weights, n)
    value = float(-np.sum(target * logp) / n)
    dz = (out * target.sum(axis=1, keepdims=True) - target) / n
    return _checked(value, _backward(params, zs, acts, dz))


def _checked(value, grads):
    if not np.isfinite(value):
        raise NonFiniteError(f"loss is not finite ({value})")
    if not grads.is_finite():
        raise NonFiniteError("gradient contains non-finite entries")
    return float(value), grads


# ---------------------------------------------------------------------------
# optimisers


@dataclass
class OptimState:
    kind: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: MlpParams | None = field(default=None, repr=False)
    v: MlpParams | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimiser {self.kind!r}")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


def opt_init(params: MlpParams, kind="adam", lr=1e-3, **kw) -> OptimState:
    state = OptimState(kind, lr, **kw)
    if kind == "adam":
        state.m = params.zeros_like()
        state.v = params.zeros_like()
    return state


def opt_step(params: MlpParams, grad: MlpParams, state: OptimState):
    """One descent step.  Returns fresh ``(params, state)``; inputs are untouched."""
    if not grad.is_finite():
        raise NonFiniteError("refusing to apply a non-finite gradient")
    step = state.step + 1
    if state.kind == "sgd":
        new = params.combine(grad, lambda p, g: p - state.lr * g)
        return new, OptimState("sgd", state.lr, state.beta1, state.beta2, state.eps, step)

    b1, b2 = state.beta1, state.beta2
    m = (state.m or params.zeros_like()).combine(grad, lambda mm, g: b1 * mm + (1 - b1) * g)
    v = (state.v or params.zeros_like()).combine(grad, lambda vv, g: b2 * vv + (1 - b2) * g * g)
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    upd = m.combine(v, lambda mm, vv: (mm / c1) / (np.sqrt(vv / c2) + state.eps))
    new = params.combine(upd, lambda p, u: p - state.lr * u)
    return new, OptimState("adam", state.lr, b1, b2, state.eps, step, m, v)


# ---------------------------------------------------------------------------
# checkpoints
#
# JSON document; each network stores its layout and one base64 string of
# little-endian float64 values in W0, b0, W1, b1, ... order (row-major).


def params_to_record(params: MlpParams) -> dict:
    raw = params.to_vector().astype("<f8").tobytes()
    return {
        "layer_sizes": list(params.layout.layer_sizes),
        "activations": list(params.layout.activations),
        "dtype": "<f8",
        "data": base64.b64encode(raw).decode("ascii"),
    }


def params_from_record(rec: dict) -> MlpParams:
    layout = Layout(tuple(rec["layer_sizes"]), tuple(rec["activations"]))
    vec = np.frombuffer(base64.b64decode(rec["data"]), dtype="<f8").astype(np.float64)
    return MlpParams.from_vector(layout, vec)


def save_checkpoint(path, networks: dict, extra: dict | None = None):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "byteorder": "little",
        "networks": {name: params_to_record(p) for name, p in sorted(networks.items())},
    }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_checkpoint(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    nets = {name: params_from_record(rec) for name, rec in doc["networks"].items()}
    return nets, doc.get("extra", {})
