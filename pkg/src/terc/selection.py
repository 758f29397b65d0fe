"""Variable-subset selection driven by the TERC measure.

Three procedures are provided:

* :func:`naive_subset` keeps every variable whose removal from the full
  set raises the action entropy.  It misses variables that have a perfect
  substitute elsewhere in the set.
* :func:`select_full` adds a power-set search over the excluded variables
  that recovers the smallest subset lost to such substitutes.  Exponential.
* :func:`select_fast` walks the variables once, dropping each one whose
  removal is free given the variables still present.  Linear, and exact
  whenever redundant groups have equal cardinality.

"Phi > 0" and "Phi equal" are decided by a :class:`ToleranceConfig`:
absolute epsilon for exact estimators, or comparison against an injected
random-variable null model for noisy ones.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from terc.data import DISCRETE, SampleTable
from terc.estimators import (
    MineCache, MineConfig, PhiEstimate, _stable_int, phi_measure, sample_mean, sample_std,
)

NULL_PREFIX = "__null"
MAX_EXCLUDED = 20


class SelectionTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ToleranceConfig:
    mode: str = "exact"
    epsilon: float = 1e-9

    def __post_init__(self):
        if self.mode not in ("exact", "statistical"):
            raise ValueError(f"unknown tolerance mode {self.mode!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class NullModel:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size < 2:
            raise ValueError("a null model needs at least two runs")

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
    def bound(self):
        return self.mean + 2.0 * self.std / math.sqrt(self.runs)

    def to_dict(self):
        return {
            "runs": [float(v) for v in self.values],
            "mean": self.mean,
            "std": self.std,
            "bound": self.bound,
        }


def null_column(n, seed, run) -> np.ndarray:
    rng = np.random.default_rng(_stable_int("null", seed, run))
    return rng.integers(0, 2, size=n, dtype=np.int64)


def _with_nulls(table, runs, seed):
    for r in range(runs):
        table = table.with_column(f"{NULL_PREFIX}{r}", null_column(table.n, seed, r), DISCRETE)
    return table


def null_bound(
    table: SampleTable,
    estimator="plugin",
    config: MineConfig | None = None,
    runs: int = 10,
    seed: int = 0,
    context=None,
    cache: MineCache | None = None,
) -> NullModel:
    """Phi of a fresh uniform {0,1} column appended to ``context``, once per run."""
    if runs < 2:
        raise ValueError("the null model needs runs >= 2")
    context = list(table.variables if context is None else context)
    context = [c for c in context if not c.startswith(NULL_PREFIX)]
    if cache is not None:
        ext = cache.table
    else:
        ext = table if f"{NULL_PREFIX}{runs - 1}" in table else _with_nulls(table, runs, seed)
        if estimator == "mine":
            cache = MineCache(ext, config or MineConfig())
    vals = []
    for r in range(runs):
        nm = f"{NULL_PREFIX}{r}"
        if estimator == "plugin":
            est = phi_measure(ext, [nm], context + [nm], "plugin")
            vals.append(est.values[0])
        else:
            vals.append(cache.mi(context + [nm], r) - cache.mi(context, r))
    return NullModel(vals)


def is_significant(phi: PhiEstimate, null: NullModel) -> bool:
    """Lower 2-sigma bound of ``phi`` strictly above the null model's upper bound."""
    if phi.runs != null.runs:
        raise ValueError(f"run counts differ: phi has {phi.runs}, null model has {null.runs}")
    return phi.lower > null.bound


def _overlap(a: PhiEstimate, b: PhiEstimate) -> bool:
    return a.lower <= b.upper and b.lower <= a.upper


class PhiEvaluator:
    """Caches Phi estimates for one table and decides positivity / equality."""

    def __init__(
        self,
        table: SampleTable,
        estimator: str = "plugin",
        tol: ToleranceConfig = ToleranceConfig(),
        config: MineConfig | None = None,
        runs: int | None = None,
        seed: int = 0,
    ):
        if estimator not in ("plugin", "mine"):
            raise ValueError(f"unknown estimator {estimator!r}")
        if not table.variables:
            raise ValueError("the table has no state variables")
        self.table = table
        self.estimator = estimator
        self.tol = tol
        self.config = config or MineConfig(seed=seed)
        self.runs = runs or self.config.runs
        self.seed = seed
        self.variables = table.variables
        self._ext = None
        self._cache = None
        self._phis = {}
        self._null = None
        self.log = []

    def _extended(self):
        if self._ext is None:
            self._ext = _with_nulls(self.table, max(self.runs, 2), self.seed)
            if self.estimator == "mine":
                self._cache = MineCache(self._ext, self.config)
        return self._ext

    def phi(self, subset, context) -> PhiEstimate:
        key = (frozenset(subset), frozenset(context))
        if key not in self._phis:
            ext = self._extended()
            self._phis[key] = phi_measure(
                ext, list(subset), list(context), self.estimator, self.runs, self.config, self._cache
            )
            self.log.append(self._phis[key])
        return self._phis[key]

    @property
    def null(self) -> NullModel:
        if self._null is None:
            self._extended()
            self._null = null_bound(
                self._ext, self.estimator, self.config, max(self.runs, 2), self.seed,
                self.variables, self._cache,
            )
        return self._null

    def positive(self, est: PhiEstimate) -> bool:
        if self.tol.mode == "exact":
            return est.mean > self.tol.epsilon
        return is_significant(est, self.null)

    def equal(self, *ests) -> bool:
        pairs = itertools.combinations(ests, 2)
        if self.tol.mode == "exact":
            return all(abs(a.mean - b.mean) <= self.tol.epsilon for a, b in pairs)
        return all(_overlap(a, b) for a, b in pairs)

    def order(self, names):
        names = set(names)
        return [v for v in self.variables if v in names]


@dataclass
class SelectionResult:
    algorithm: str
    selected: list
    variables: list
    phis: list = field(default_factory=list)
    null: NullModel | None = None
    decisions: list = field(default_factory=list)
    estimator: str = "plugin"
    tolerance: ToleranceConfig = ToleranceConfig()

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "estimator": self.estimator,
            "tolerance": {"mode": self.tolerance.mode, "epsilon": self.tolerance.epsilon},
            "variables": list(self.variables),
            "selected": list(self.selected),
            "null": self.null.to_dict() if self.null else None,
            "phis": [p.to_dict() for p in self.phis],
            "decisions": self.decisions,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_dot(self, significant=None, action="A"):
        return to_dot(self.selected if significant is None else significant, action)


def to_dot(significant, action="A") -> str:
    lines = ["digraph terc {", f'  "{action}" [shape=box];']
    for v in significant:
        lines.append(f'  "{v}" -> "{action}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _decision(ev, step, est, action, reason):
    return {
        "step": step,
        "target": list(est.target),
        "context": list(est.context),
        "phi": est.mean,
        "lower": est.lower,
        "upper": est.upper,
        "decision": action,
        "reason": reason,
    }


def _evaluator(table, tol, estimator, evaluator=None, **kw):
    if evaluator is not None:
        return evaluator
    return PhiEvaluator(table, estimator, tol, **kw)


def _result(ev, algorithm, selected, decisions):
    null = ev._null if ev.tol.mode == "statistical" else None
    return SelectionResult(
        algorithm, ev.order(selected), list(ev.variables), list(ev.log), null,
        decisions, ev.estimator, ev.tol,
    )


def naive_subset(table=None, tol=ToleranceConfig(), estimator="plugin", *, evaluator=None, **kw):
    """Every variable with positive Phi against the full variable set."""
    ev = _evaluator(table, tol, estimator, evaluator, **kw)
    full = ev.variables
    selected, decisions = [], []
    for i, v in enumerate(full):
        est = ev.phi([v], full)
        if ev.positive(est):
            selected.append(v)
            decisions.append(_decision(ev, i, est, "include", "phi > 0 against the full set"))
        else:
            decisions.append(_decision(ev, i, est, "exclude", "phi = 0 against the full set"))
    return _result(ev, "naive", selected, decisions)


def _powerset(items):
    for k in range(1, len(items) + 1):
        yield from itertools.combinations(items, k)


def select_full(table=None, tol=ToleranceConfig(), estimator="plugin", *, evaluator=None,
                max_excluded=MAX_EXCLUDED, **kw):
    """Naive pass, then a power-set search over excluded variables.

    For each excluded subset P_k (ascending size, then index order) that
    still adds information on top of the current selection, the family of
    subsets carrying the same information is collected with the triple
    equality test and its smallest member joins the selection.
    """
    ev = _evaluator(table, tol, estimator, evaluator, **kw)
    full = ev.variables
    base = naive_subset(evaluator=ev)
    selected = list(base.selected)
    decisions = list(base.decisions)
    rest = [v for v in full if v not in selected]
    if len(rest) > max_excluded:
        raise SelectionTooLarge(
            f"{len(rest)} excluded variables exceed the power-set guard of {max_excluded}; "
            "use select_fast instead"
        )
    subsets = list(_powerset(rest))
    rank = {v: i for i, v in enumerate(full)}

    def key(p):
        return (len(p), tuple(rank[v] for v in p))

    step = len(decisions)
    for k, pk in enumerate(subsets):
        remaining = [v for v in full if v not in selected]
        if not remaining:
            break
        whole = ev.phi(remaining, full)
        if not ev.positive(whole):
            decisions.append(_decision(ev, step, whole, "stop", "excluded variables carry no further information"))
            break
        if set(pk) & set(selected):
            continue
        phk = ev.phi(pk, selected + list(pk))
        if not ev.positive(phk):
            continue
        family = [pk]
        for pl in subsets[k + 1:]:
            if set(pl) & set(selected):
                continue
            phl = ev.phi(pl, selected + list(pl))
            union = ev.order(set(pk) | set(pl))
            phu = ev.phi(union, selected + union)
            if ev.equal(phk, phl, phu):
                family.append(pl)
        best = min(family, key=key)
        step += 1
        decisions.append(_decision(
            ev, step, ev.phi(best, selected + list(best)), "union",
            f"smallest of {len(family)} equally informative subsets",
        ))
        selected = ev.order(set(selected) | set(best))
    return _result(ev, "alg1", selected, decisions)


def select_fast(table=None, tol=ToleranceConfig(), estimator="plugin", *, evaluator=None, **kw):
    """Single pass in index order, shrinking the context as variables drop out."""
    ev = _evaluator(table, tol, estimator, evaluator, **kw)
    context = list(ev.variables)
    selected, decisions = [], []
    for i, v in enumerate(ev.variables):
        est = ev.phi([v], context)
        if ev.positive(est):
            selected.append(v)
            decisions.append(_decision(ev, i, est, "keep", "phi > 0 given the surviving variables"))
        else:
            context.remove(v)
            decisions.append(_decision(ev, i, est, "remove", "phi = 0 given the surviving variables"))
    return _result(ev, "alg2", selected, decisions)


ALGORITHMS = {"naive": naive_subset, "alg1": select_full, "alg2": select_fast}


def run_selection(algorithm, evaluator) -> SelectionResult:
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}") from None
    res = fn(evaluator=evaluator)
    if evaluator.tol.mode == "statistical":
        res.null = evaluator.null
    return res
