"""Entropy, mutual information and the TERC measure.

Two estimator families live here.  The plug-in functions count joint symbol
frequencies exactly and serve as the reference everywhere.  :func:`mine_mi`
trains a small network on the Donsker-Varadhan bound and is what
:func:`phi_measure` uses for real-valued or high-cardinality data.

All values are in nats.  Use :func:`to_bits` at report time only.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from terc import _kernels
from terc.data import SampleTable
from terc.neural import Layout, NonFiniteError, mlp_forward, mlp_grad, mlp_init, opt_init, opt_step

LN2 = math.log(2.0)


def to_bits(nats):
    return np.asarray(nats) / LN2 if np.ndim(nats) else nats / LN2


# ---------------------------------------------------------------------------
# plug-in estimators


def _as_codes(cols) -> np.ndarray:
    """Coerce one column, a list of columns or a 2-D array into an int64 matrix."""
    if isinstance(cols, np.ndarray) and cols.ndim == 2:
        arr = cols
    elif isinstance(cols, np.ndarray) and cols.ndim == 1:
        arr = cols[:, None]
    else:
        cols = list(cols)
        if not cols:
            return np.zeros((0, 0), dtype=np.int64)
        if np.ndim(cols[0]) == 0:
            arr = np.asarray(cols)[:, None]
        else:
            arr = np.column_stack([np.asarray(c) for c in cols])
    if arr.dtype.kind == "f":
        if not np.all(arr == np.round(arr)):
            raise ValueError(
                "plug-in estimators need discrete symbols; quantize real columns first "
                "(SampleTable.quantized)"
            )
    elif arr.dtype.kind not in "iub":
        raise ValueError(f"unsupported column dtype {arr.dtype}")
    return np.ascontiguousarray(arr, dtype=np.int64)


def _joint(*blocks):
    mats = [b for b in blocks if b.size]
    if not mats:
        return None
    return _kernels.joint_codes(np.ascontiguousarray(np.hstack(mats)))


def _entropy_of(*blocks):
    jc = _joint(*blocks)
    if jc is None:
        return 0.0
    return float(_kernels.entropy_codes(jc[0], jc[1]))


def _check_lengths(*blocks):
    ns = {b.shape[0] for b in blocks if b.size}
    if len(ns) > 1:
        raise ValueError(f"columns have differing lengths {sorted(ns)}")


def plugin_entropy(cols) -> float:
    """Empirical joint entropy of one or more discrete columns."""
    c = _as_codes(cols)
    return _entropy_of(c)


def plugin_cond_entropy(target, given) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    t, g = _as_codes(target), _as_codes(given)
    _check_lengths(t, g)
    if not g.size:
        return _entropy_of(t)
    return _entropy_of(t, g) - _entropy_of(g)


def plugin_mi(x, y) -> float:
    """I(X;Y) summed cell by cell as p(x,y) log[p(x,y) / p(x)p(y)].

    The direct form (rather than H(X)+H(Y)-H(X,Y)) makes independent
    enumerated tables come out as exactly zero.
    """
    xc, yc = _as_codes(x), _as_codes(y)
    _check_lengths(xc, yc)
    if not xc.size or not yc.size:
        return 0.0
    n = xc.shape[0]
    cx, kx = _kernels.joint_codes(xc)
    cy, ky = _kernels.joint_codes(yc)
    cxy, kxy = _kernels.joint_codes(np.column_stack([cx, cy]))
    nx = np.bincount(cx, minlength=kx)
    ny = np.bincount(cy, minlength=ky)
    nxy = np.bincount(cxy, minlength=kxy)
    # representative row of each joint cell
    first = np.full(kxy, -1, dtype=np.int64)
    first[cxy[::-1]] = np.arange(n - 1, -1, -1)
    terms = nxy * np.log(n * nxy / (nx[cx[first]] * ny[cy[first]]))
    return math.fsum(terms.tolist()) / n


def plugin_cmi(x, y, given) -> float:
    """I(X;Y|Z) summed cell by cell as p(x,y,z) log[p(x,y,z) p(z) / p(x,z) p(y,z)].

    Cells where X is a function of Z (or Y of Z) contribute log 1 = 0
    exactly, so conditional independence by construction gives exactly 0.
    """
    xc, yc, zc = _as_codes(x), _as_codes(y), _as_codes(given)
    _check_lengths(xc, yc, zc)
    if not zc.size:
        return plugin_mi(xc, yc)
    if not xc.size or not yc.size:
        return 0.0
    n = xc.shape[0]
    cx = _kernels.joint_codes(xc)[0]
    cy = _kernels.joint_codes(yc)[0]
    cz, kz = _kernels.joint_codes(zc)
    cxz, kxz = _kernels.joint_codes(np.column_stack([cx, cz]))
    cyz, kyz = _kernels.joint_codes(np.column_stack([cy, cz]))
    cxyz, kxyz = _kernels.joint_codes(np.column_stack([cxz, cy]))
    nz = np.bincount(cz, minlength=kz)
    nxz = np.bincount(cxz, minlength=kxz)
    nyz = np.bincount(cyz, minlength=kyz)
    nxyz = np.bincount(cxyz, minlength=kxyz)
    first = np.full(kxyz, -1, dtype=np.int64)
    first[cxyz[::-1]] = np.arange(n - 1, -1, -1)
    num = nxyz * nz[cz[first]]
    den = nxz[cxz[first]] * nyz[cyz[first]]
    terms = np.where(num == den, 0.0, nxyz * np.log(num / den))
    return math.fsum(terms.tolist()) / n


def plugin_transfer_entropy(source, dest, *, form="entropy") -> float:
    """Transfer entropy from ``source`` (Y) to ``dest`` (X) at lag one.

    ``form="entropy"`` evaluates H(X_t|X_{t-1}) - H(X_t|X_{t-1},Y_{t-1});
    ``form="mi"`` evaluates I(X_t; X_{t-1},Y_{t-1}) - I(X_t; X_{t-1}).  The
    two agree up to rounding on every input.
    """
    y, x = _as_codes(source), _as_codes(dest)
    if x.shape[0] != y.shape[0]:
        raise ValueError("source and destination series must be aligned")
    if x.shape[0] < 2:
        raise ValueError("transfer entropy needs series of length >= 2")
    xt, xp, yp = x[1:], x[:-1], y[:-1]
    if form == "entropy":
        return plugin_cond_entropy(xt, xp) - plugin_cond_entropy(xt, np.hstack([xp, yp]))
    if form == "mi":
        return plugin_mi(xt, np.hstack([xp, yp])) - plugin_mi(xt, xp)
    raise ValueError(f"unknown form {form!r}")


def conditional_redundancy(target, variables) -> float:
    """sum_i H(Z|X_i) - H(Z|X_1..X_N) for two or more variables."""
    variables = [_as_codes(v) for v in variables]
    if len(variables) < 2:
        raise ValueError("conditional redundancy needs at least two variables")
    z = _as_codes(target)
    total = sum(plugin_cond_entropy(z, v) for v in variables)
    return total - plugin_cond_entropy(z, np.hstack(variables))


def synergy(target, variables) -> float:
    """I(Z; X_1..X_N) - sum_i I(Z; X_i)."""
    variables = [_as_codes(v) for v in variables]
    if not variables:
        raise ValueError("synergy needs at least one variable")
    z = _as_codes(target)
    return plugin_mi(z, np.hstack(variables)) - sum(plugin_mi(z, v) for v in variables)


# ---------------------------------------------------------------------------
# neural estimator


class EstimatorDiverged(NonFiniteError):
    def __init__(self, iteration, detail=""):
        super().__init__(f"MI estimator diverged at iteration {iteration}: {detail}".rstrip(": "))
        self.iteration = iteration


@dataclass(frozen=True)
class MineConfig:
    """Hyperparameters of the neural MI estimator.

    ``batch`` and ``iters`` are the minibatch size and iteration count of
    the training loop.  The defaults are desk-scale; the published runs used
    batch 1000-25000 and 2000-100000 iterations.
    """

    hidden: int = 50
    lr: float = 0.01
    batch: int = 512
    iters: int = 600
    seed: int = 0
    runs: int = 10
    optimizer: str = "adam"

    def __post_init__(self):
        for name in ("hidden", "batch", "iters", "runs"):
            if getattr(self, name) < 1:
                raise ValueError(f"MineConfig.{name} must be positive")
        if not self.lr > 0:
            raise ValueError("MineConfig.lr must be positive")


def _standardise(m):
    mu = m.mean(axis=0)
    sd = m.std(axis=0)
    sd[sd == 0] = 1.0
    return (m - mu) / sd


def mine_mi(x, a, config: MineConfig = MineConfig()) -> float:
    """Donsker-Varadhan estimate of I(X;A) in nats.

    A network F over concatenated ``(x, a)`` rows maximises
    ``mean F(joint) - log mean exp F(marginal)``, where marginal rows pair
    each state with the action of another row of the same minibatch (a
    random permutation of the action column).  After ``config.iters`` steps
    the bound is evaluated once on the whole sample with a fresh
    permutation and returned.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    n = x.shape[0]
    if a.shape[0] != n:
        raise ValueError("states and actions must have the same number of rows")
    if x.shape[1] == 0:
        return 0.0
    b = min(config.batch, n)
    if b < 2:
        raise ValueError("need at least two rows")

    xs, as_ = _standardise(x), _standardise(a)
    dx = xs.shape[1]
    rng = np.random.default_rng(config.seed)
    params = mlp_init(Layout.simple(dx + as_.shape[1], config.hidden, 1), int(rng.integers(2**31)))
    state = opt_init(params, config.optimizer, config.lr)

    for it in range(config.iters):
        idx = rng.choice(n, size=b, replace=False) if b < n else rng.permutation(n)
        perm = rng.permutation(b)
        xb, ab = xs[idx], as_[idx]
        joint = np.hstack([xb, ab])
        marg = np.hstack([xb, ab[perm]])
        try:
            _, grad = mlp_grad(params, joint, loss="dv-objective", x_marginal=marg)
            params, state = opt_step(params, grad, state)
        except NonFiniteError as exc:
            raise EstimatorDiverged(it, str(exc)) from exc

    perm = rng.permutation(n)
    fj = mlp_forward(params, np.hstack([xs, as_]))[:, 0]
    fm = mlp_forward(params, np.hstack([xs, as_[perm]]))[:, 0]
    top = fm.max()
    value = fj.mean() - (top + np.log(np.mean(np.exp(fm - top))))
    if not np.isfinite(value):
        raise EstimatorDiverged(config.iters, "final bound is not finite")
    return float(value)


# ---------------------------------------------------------------------------
# the TERC measure


def sample_mean(values) -> float:
    """Mean that returns a repeated value unchanged (no summation rounding)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size and np.all(values == values[0]):
        return float(values[0])
    return float(np.mean(values))


def sample_std(values) -> float:
    """Sample standard deviation (ddof=1); exactly 0 for repeated values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2 or np.all(values == values[0]):
        return 0.0
    return float(np.std(values, ddof=1))


@dataclass
class PhiEstimate:
    target: tuple
    values: np.ndarray
    context: tuple = ()

    def __post_init__(self):
        self.target = tuple(self.target)
        self.context = tuple(self.context)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size < 1:
            raise ValueError("a PhiEstimate needs at least one run")

    @property
    def runs(self):
        return int(self.values.size)

    @property
    def mean(self):
        return sample_mean(self.values)

    @property
    def std(self):
        return sample_std(self.values)

    @property
    def half_width(self):
        return 2.0 * self.std / math.sqrt(self.runs)

    @property
    def lower(self):
        return self.mean - self.half_width

    @property
    def upper(self):
        return self.mean + self.half_width

    @property
    def label(self):
        return "+".join(self.target)

    def to_dict(self):
        return {
            "target": list(self.target),
            "context": list(self.context),
            "runs": [float(v) for v in self.values],
            "mean": self.mean,
            "std": self.std,
            "lower": self.lower,
            "upper": self.upper,
        }


def _stable_int(*parts) -> int:
    h = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") & (2**63 - 1)


@dataclass
class MineCache:
    """Memo of neural MI values keyed by (context columns, run).

    The seed of each entry depends only on the base seed, the run index and
    the context, so the cache never changes a result, only whether it is
    recomputed.
    """

    table: SampleTable
    config: MineConfig
    values: dict = field(default_factory=dict)

    def mi(self, context, run) -> float:
        key = (tuple(sorted(context)), run)
        if key not in self.values:
            if not context:
                self.values[key] = 0.0
            else:
                seed = _stable_int(self.config.seed, run, *key[0])
                cfg = replace(self.config, seed=seed)
                x = self.table.matrix(key[0])
                a = self.table[self.table.action].astype(np.float64)
                self.values[key] = mine_mi(x, a, cfg)
        return self.values[key]


def _ordered(table, names):
    names = set(names)
    return [c for c in table.names if c in names]


def phi_measure(
    table: SampleTable,
    subset,
    context=None,
    estimator: str = "plugin",
    runs: int | None = None,
    config: MineConfig | None = None,
    cache: MineCache | None = None,
) -> PhiEstimate:
    """Phi of ``subset`` within ``context``: I(C;A) - I(C minus S;A).

    ``context`` defaults to every state variable.  The plug-in path returns
    the exact value H(A|C minus S) - H(A|C), repeated once per run so it
    can be compared against a null model with the same run count.
    """
    if isinstance(subset, str):
        subset = [subset]
    subset = list(subset)
    context = table.variables if context is None else list(context)
    if not subset:
        raise ValueError("subset must be non-empty")
    missing = [s for s in subset if s not in context]
    if missing:
        raise ValueError(f"subset members {missing} are not in the context")
    subset = _ordered(table, subset)
    context = _ordered(table, context)
    rest = [c for c in context if c not in subset]

    if estimator == "plugin":
        runs = runs or 1
        # H(A|rest) - H(A|context) is the conditional MI I(A; S | rest)
        val = plugin_cmi(table.codes([table.action]), table.codes(subset), table.codes(rest))
        return PhiEstimate(subset, np.full(runs, val), context)
    if estimator == "mine":
        config = config or MineConfig()
        runs = runs or config.runs
        cache = cache or MineCache(table, config)
        vals = [cache.mi(context, r) - cache.mi(rest, r) for r in range(runs)]
        return PhiEstimate(subset, vals, context)
    raise ValueError(f"unknown estimator {estimator!r}")
