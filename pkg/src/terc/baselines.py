"""Permutation importance on a closed-form ridge regressor.

The baseline every feature-attribution comparison is run against: fit a
ridge model on all state variables, then measure how much the score drops
when one column is shuffled.  Binary targets are scored by accuracy of the
thresholded prediction, anything else by negative mean squared error.

Significance mirrors the TERC null model: an injected uniform {0, 1}
column is scored the same way over several repetitions and a feature is
significant when its lower 2-sigma bound clears the null bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from terc import _kernels
from terc.data import SampleTable
from terc.estimators import _stable_int
from terc.selection import NullModel, null_column

CHUNK = 100


@dataclass
class RidgeModel:
    coef: np.ndarray
    intercept: float
    lam: float

    def predict(self, x):
        return np.asarray(x, dtype=np.float64) @ self.coef + self.intercept


def ridge_fit(x, y, lam=0.01) -> RidgeModel:
    """Minimise ||y - Xb - c||^2 + lam ||b||^2 in closed form; the intercept is not penalised."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 1:
        raise ValueError("ridge_fit needs at least one row")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"{x.shape[0]} feature rows but {y.shape[0]} targets")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    xm = x.mean(axis=0)
    ym = y.mean()
    xc = x - xm
    gram = xc.T @ xc + lam * np.eye(x.shape[1])
    if lam == 0 and np.linalg.matrix_rank(gram) < x.shape[1]:
        raise ValueError("singular normal equations with lambda = 0; use lambda > 0")
    coef = np.linalg.solve(gram, xc.T @ (y - ym))
    return RidgeModel(coef, float(ym - xm @ coef), float(lam))


def _is_binary(y):
    vals = np.unique(y)
    return vals.size <= 2 and np.all(np.isin(vals, (0, 1)))


@dataclass
class PiResult:
    names: list
    per_run: np.ndarray  # (runs, features) score drops
    alpha: float
    scoring: str
    base_score: float
    null: NullModel | None = None
    meta: dict = field(default_factory=dict)

    @property
    def runs(self):
        return int(self.per_run.shape[0])

    @property
    def importances(self) -> dict:
        return {nm: float(v) for nm, v in zip(self.names, self.per_run.mean(axis=0))}

    def _stats(self, j):
        col = self.per_run[:, j]
        mean = float(col.mean())
        std = float(col.std(ddof=1)) if self.runs > 1 else 0.0
        half = 2.0 * std / math.sqrt(self.runs)
        return mean, std, mean - half, mean + half

    def significant(self) -> list:
        if self.null is None:
            raise ValueError("no null model attached; run pi_significance")
        return [nm for j, nm in enumerate(self.names) if self._stats(j)[2] > self.null.bound]

    def rows(self):
        out = []
        for j, nm in enumerate(self.names):
            mean, std, lo, hi = self._stats(j)
            out.append({"variable": nm, "mean": mean, "std": std, "lower": lo, "upper": hi})
        return out

    def to_dict(self):
        sig = self.significant() if self.null is not None else None
        return {
            "method": "permutation-importance",
            "runs": self.runs,
            "alpha": self.alpha,
            "scoring": self.scoring,
            "base_score": self.base_score,
            "rows": self.rows(),
            "null": self.null.to_dict() if self.null is not None else None,
            "significant": sig,
        }


def _scores(model, x, y, perms_for, scoring, runs, columns):
    """Score after permuting each listed column; columns are shuffled independently per run."""
    pred = model.predict(x)
    out = np.empty((runs, len(columns)))
    ident = np.arange(len(y))[None, :]
    if scoring == "accuracy":
        base = _kernels.permuted_acc(pred, y, x[:, 0].copy(), 0.0, ident, 0.5)[0]
    else:
        base = -_kernels.permuted_mse(pred, y, x[:, 0].copy(), 0.0, ident)[0]
    for k, j in enumerate(columns):
        perms = perms_for(j)
        col = np.ascontiguousarray(x[:, j])
        for lo in range(0, runs, CHUNK):
            p = perms[lo:lo + CHUNK]
            if scoring == "accuracy":
                out[lo:lo + CHUNK, k] = _kernels.permuted_acc(pred, y, col, float(model.coef[j]), p, 0.5)
            else:
                out[lo:lo + CHUNK, k] = -_kernels.permuted_mse(pred, y, col, float(model.coef[j]), p)
    return base, base - out


def permutation_importance(
    table: SampleTable,
    fit=None,
    runs: int = 1000,
    alpha: float = 0.01,
    seed: int = 0,
    scoring: str = "auto",
    only=None,
) -> PiResult:
    """importance_j = base score - score with column j shuffled, for ``runs`` shuffles.

    ``fit(x, y) -> model`` must return a linear model with ``coef``,
    ``intercept`` and ``predict``; the default is :func:`ridge_fit` with
    penalty ``alpha``.  ``only`` restricts the shuffles to the named columns
    (the model is still fitted on all of them).
    """
    names = table.variables
    if not names:
        raise ValueError("permutation importance needs at least one feature")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    x = table.matrix(names).astype(np.float64)
    y = table[table.action].astype(np.float64)
    if scoring == "auto":
        scoring = "accuracy" if _is_binary(y) else "neg-mse"
    if scoring not in ("accuracy", "neg-mse"):
        raise ValueError(f"unknown scoring {scoring!r}")
    fit = fit or (lambda a, b: ridge_fit(a, b, alpha))
    model = fit(x, y)

    def perms_for(j):
        rng = np.random.default_rng(_stable_int("pi", seed, names[j]))
        return rng.permuted(np.tile(np.arange(len(y)), (runs, 1)), axis=1)

    only = list(names) if only is None else list(only)
    cols = [names.index(nm) for nm in only]
    base, drops = _scores(model, x, y, perms_for, scoring, runs, cols)
    return PiResult(only, drops, alpha, scoring, float(base), meta={"seed": seed})


def pi_significance(table: SampleTable, result: PiResult, reps: int = 10, seed: int = 0,
                    fit=None) -> PiResult:
    """Attach a null model built from injected random columns (one per repetition)."""
    vals = []
    for r in range(reps):
        nm = f"__null{r}"
        ext = table.with_column(nm, null_column(table.n, seed, r))
        res = permutation_importance(
            ext.select(table.variables + [nm]), fit, result.runs, result.alpha,
            _stable_int("pi-null", seed, r), result.scoring, only=[nm],
        )
        vals.append(res.importances[nm])
    result.null = NullModel(vals)
    return result
