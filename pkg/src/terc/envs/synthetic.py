"""Binary datasets with planted redundancy.

Both datasets draw three fair bits X1, X2, X3 and set the target to 1 when
the three agree.  ``four_redundant`` adds three copies of X1;
``two_triplets`` adds one copy of each of X1, X2, X3.
"""

from dataclasses import dataclass

import numpy as np

from terc.data import DISCRETE, SampleTable

KINDS = ("four_redundant", "two_triplets")


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str = "four_redundant"
    n: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown synthetic dataset {self.kind!r}; choose from {KINDS}")
        if self.n < 1:
            raise ValueError("n must be at least 1")


def gen_synthetic(spec: SyntheticSpec) -> SampleTable:
    rng = np.random.default_rng(spec.seed)
    x1, x2, x3 = rng.integers(0, 2, size=(3, spec.n), dtype=np.int64)
    target = ((x1 == x2) & (x2 == x3)).astype(np.int64)
    if spec.kind == "four_redundant":
        extra = (x1.copy(), x1.copy(), x1.copy())
    else:
        extra = (x1.copy(), x2.copy(), x3.copy())
    cols = dict(zip(("X1", "X2", "X3", "X4", "X5", "X6"), (x1, x2, x3) + extra))
    cols["action"] = target
    return SampleTable(cols, kinds={c: DISCRETE for c in cols})
