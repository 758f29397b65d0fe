"""Sample tables and recorded trajectories, plus their file formats.

Trajectory files are JSONL, one object per environment step::

    {"ep": 0, "t": 0, "s": [1, 0, 3], "a": 1, "r": 2.0}

next to a sidecar ``<stem>.meta.json`` holding variable names, the env
config, seeds and per-episode returns.  Plain CSV with a header row and an
``action`` column is accepted wherever a sample table is expected.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from terc import _kernels

ACTION = "action"
DISCRETE = "discrete"
REAL = "real"


def _infer_kind(values: np.ndarray) -> str:
    if values.dtype.kind in "iub":
        return DISCRETE
    if values.size and np.all(np.isfinite(values)) and np.all(values == np.round(values)):
        return DISCRETE
    return REAL


def _coerce(values, kind):
    values = np.asarray(values)
    if kind == DISCRETE:
        return values.astype(np.int64)
    return values.astype(np.float64)


class SampleTable:
    """Immutable column store: named state variables plus one action column.

    ``kinds`` maps every column to ``"discrete"`` (int64 symbols) or
    ``"real"`` (float64).  Kinds are inferred when not given: integer dtypes
    and all-integral floats are discrete.
    """

    def __init__(self, columns: dict, action: str = ACTION, kinds: dict | None = None):
        if action not in columns:
            raise ValueError(f"action column {action!r} missing")
        names = list(columns)
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        lengths = {len(np.asarray(v)) for v in columns.values()}
        if len(lengths) != 1:
            raise ValueError(f"columns have differing lengths {sorted(lengths)}")
        n = lengths.pop()
        if n < 1:
            raise ValueError("a sample table needs at least one row")
        kinds = dict(kinds or {})
        data = {}
        for name, values in columns.items():
            arr = np.asarray(values)
            if arr.ndim != 1:
                raise ValueError(f"column {name!r} must be one-dimensional")
            if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
                raise ValueError(f"column {name!r} has missing or non-finite entries")
            kind = kinds.get(name) or _infer_kind(arr)
            kinds[name] = kind
            data[name] = _coerce(arr, kind)
            data[name].setflags(write=False)
        self._data = data
        self.kinds = {k: kinds[k] for k in names}
        self.action = action
        self.n = n

    # construction -----------------------------------------------------------

    @classmethod
    def from_arrays(cls, states, actions, names=None, action=ACTION, kinds=None):
        states = np.asarray(states)
        if states.ndim == 1:
            states = states[:, None]
        names = list(names) if names is not None else [f"X{i + 1}" for i in range(states.shape[1])]
        if len(names) != states.shape[1]:
            raise ValueError("one name per state column required")
        cols = {nm: states[:, i] for i, nm in enumerate(names)}
        cols[action] = np.asarray(actions).reshape(-1)
        return cls(cols, action=action, kinds=kinds)

    # access ---------------------------------------------------------------------

    @property
    def variables(self) -> list:
        return [c for c in self._data if c != self.action]

    @property
    def names(self) -> list:
        return list(self._data)

    def __getitem__(self, name) -> np.ndarray:
        return self._data[name]

    def __contains__(self, name):
        return name in self._data

    def __len__(self):
        return self.n

    def matrix(self, names) -> np.ndarray:
        names = list(names)
        if not names:
            return np.zeros((self.n, 0))
        return np.column_stack([self._data[c].astype(np.float64) for c in names])

    def codes(self, names) -> np.ndarray:
        """int64 matrix of the named columns; every column must be discrete."""
        names = list(names)
        for c in names:
            if self.kinds[c] != DISCRETE:
                raise ValueError(
                    f"column {c!r} is real-valued; call quantized() before plug-in estimation"
                )
        if not names:
            return np.zeros((self.n, 0), dtype=np.int64)
        return np.column_stack([self._data[c] for c in names])

    # derived tables -----------------------------------------------------------

    def with_column(self, name, values, kind=None) -> "SampleTable":
        if name in self._data:
            raise ValueError(f"column {name!r} already exists")
        cols = {c: v for c, v in self._data.items() if c != self.action}
        cols[name] = values
        cols[self.action] = self._data[self.action]
        kinds = dict(self.kinds)
        if kind:
            kinds[name] = kind
        return SampleTable(cols, self.action, kinds)

    def select(self, names) -> "SampleTable":
        names = list(names)
        cols = {c: self._data[c] for c in names}
        cols[self.action] = self._data[self.action]
        return SampleTable(cols, self.action, {c: self.kinds[c] for c in cols})

    def rows(self, index) -> "SampleTable":
        idx = np.asarray(index)
        return SampleTable({c: v[idx] for c, v in self._data.items()}, self.action, self.kinds)

    def quantized(self, bins: int = 32) -> "SampleTable":
        """Uniform ``bins``-bin quantisation of every real column."""
        cols = {}
        for c, v in self._data.items():
            cols[c] = _kernels.quantize(v, bins) if self.kinds[c] == REAL else v
        return SampleTable(cols, self.action, {c: DISCRETE for c in cols})

    @property
    def is_discrete(self):
        return all(k == DISCRETE for k in self.kinds.values())

    # io -------------------------------------------------------------------------

    def to_csv(self, path):
        path = Path(path)
        names = self.names
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = [ACTION if c == self.action else c for c in names]
            w.writerow(header)
            cols = [self._data[c] for c in names]
            for i in range(self.n):
                w.writerow([_fmt(col[i]) for col in cols])

    @classmethod
    def from_csv(cls, path, action=ACTION):
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            body = [row for row in reader if row]
        if action not in header:
            raise ValueError(f"{path}: no {action!r} column in header {header}")
        arr = np.array(body, dtype=np.float64).reshape(len(body), len(header))
        return cls({h: arr[:, j] for j, h in enumerate(header)}, action=action)

    def __repr__(self):
        return f"SampleTable(n={self.n}, variables={self.variables}, action={self.action!r})"


def _fmt(v):
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return repr(float(v))


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


@dataclass
class TrajectoryBatch:
    """Recorded (state, action, reward) steps of one or more episodes."""

    episodes: np.ndarray
    steps: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    var_names: list
    env_config: dict = field(default_factory=dict)
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.episodes = np.asarray(self.episodes, dtype=np.int64)
        self.steps = np.asarray(self.steps, dtype=np.int64)
        self.states = np.asarray(self.states)
        if self.states.ndim == 1:
            self.states = self.states.reshape(-1, len(self.var_names))
        self.actions = np.asarray(self.actions)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        n = len(self.episodes)
        for nm in ("steps", "states", "actions", "rewards"):
            if len(getattr(self, nm)) != n:
                raise ValueError(f"{nm} has {len(getattr(self, nm))} rows, expected {n}")
        if n and self.states.shape[1] != len(self.var_names):
            raise ValueError("state width does not match variable names")

    def __len__(self):
        return len(self.episodes)

    @property
    def episode_ids(self) -> np.ndarray:
        ids, first = np.unique(self.episodes, return_index=True)
        return ids[np.argsort(first)]

    @property
    def returns(self) -> dict:
        """Cumulative reward per episode, summed in step order."""
        out = {}
        for ep, r in zip(self.episodes.tolist(), self.rewards.tolist()):
            out[ep] = out.get(ep, 0.0) + r
        return out

    def check(self):
        """Validate the ordering invariants; raises ValueError."""
        if len(self) == 0:
            raise ValueError("empty trajectory batch")
        last = {}
        for ep, t in zip(self.episodes.tolist(), self.steps.tolist()):
            if ep in last and t <= last[ep]:
                raise ValueError(f"episode {ep}: step {t} does not increase")
            last[ep] = t

    def select_episodes(self, ids, **meta) -> "TrajectoryBatch":
        mask = np.isin(self.episodes, np.asarray(list(ids), dtype=np.int64))
        return TrajectoryBatch(
            self.episodes[mask], self.steps[mask], self.states[mask], self.actions[mask],
            self.rewards[mask], list(self.var_names), dict(self.env_config), self.seed,
            {**self.meta, **meta},
        )

    def to_table(self, action=ACTION) -> SampleTable:
        kinds = None
        if self.states.dtype.kind in "iu":
            kinds = {nm: DISCRETE for nm in self.var_names}
        return SampleTable.from_arrays(self.states, self.actions, self.var_names, action, kinds)

    # io -------------------------------------------------------------------------

    def metadata(self) -> dict:
        rets = self.returns
        return _jsonable({
            "format": "terc-trajectory",
            "version": 1,
            "var_names": list(self.var_names),
            "state_dtype": "int" if self.states.dtype.kind in "iu" else "real",
            "env": self.env_config,
            "seed": self.seed,
            "rows": len(self),
            "episode_returns": [[ep, rets[ep]] for ep in self.episode_ids.tolist()],
            **self.meta,
        })

    def write_jsonl(self, path):
        path = Path(path)
        int_states = self.states.dtype.kind in "iu"
        int_actions = self.actions.dtype.kind in "iu"
        with path.open("w") as fh:
            for i in range(len(self)):
                s = self.states[i]
                row = {
                    "ep": int(self.episodes[i]),
                    "t": int(self.steps[i]),
                    "s": [int(v) for v in s] if int_states else [float(v) for v in s],
                    "a": _action_json(self.actions[i], int_actions),
                    "r": float(self.rewards[i]),
                }
                fh.write(json.dumps(row, separators=(",", ":")) + "\n")
        meta_path(path).write_text(json.dumps(self.metadata(), sort_keys=True, indent=1) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "TrajectoryBatch":
        path = Path(path)
        mpath = meta_path(path)
        meta = json.loads(mpath.read_text()) if mpath.exists() else {}
        eps, ts, ss, aa, rr = [], [], [], [], []
        with path.open() as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                eps.append(row["ep"])
                ts.append(row["t"])
                ss.append(row["s"])
                aa.append(row["a"])
                rr.append(row["r"])
        if not eps:
            raise ValueError(f"{path}: no trajectory rows")
        int_states = meta.get("state_dtype") == "int" or all(
            isinstance(v, int) for s in ss for v in s
        )
        states = np.array(ss, dtype=np.int64 if int_states else np.float64)
        actions = np.array(aa)
        names = meta.get("var_names") or [f"X{i + 1}" for i in range(states.shape[1])]
        skip = {"format", "version", "var_names", "state_dtype", "env", "seed", "rows", "episode_returns"}
        extra = {k: v for k, v in meta.items() if k not in skip}
        return cls(eps, ts, states, actions, rr, names, meta.get("env", {}), meta.get("seed"), extra)


def _action_json(a, as_int):
    if np.ndim(a):
        return [int(v) if as_int else float(v) for v in np.ravel(a)]
    return int(a) if as_int else float(a)


def meta_path(path) -> Path:
    path = Path(path)
    stem = path.name[: -len(".jsonl")] if path.name.endswith(".jsonl") else path.name
    return path.with_name(stem + ".meta.json")


def load_table(path, action=ACTION) -> SampleTable:
    """Read a sample table from a trajectory JSONL file or a CSV file."""
    path = Path(path)
    if path.suffix == ".csv":
        return SampleTable.from_csv(path, action)
    return TrajectoryBatch.read_jsonl(path).to_table(action)
