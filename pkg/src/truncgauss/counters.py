"""Branch counters shared by the jitted samplers.

Every kernel takes an ``int64`` array ``cnt`` and bumps the slots below.
:class:`Counters` is the Python-side view used by the CLI and the tests.
"""

from __future__ import annotations

import numpy as np

# univariate table sampler
UNI_PROPOSALS = 0
UNI_FAST = 1
UNI_SLOW = 2
UNI_TAIL = 3
UNI_EDGE = 4
UNI_TEXP = 5
UNI_NAIVE = 6
UNI_DEVROYE = 7
# lazy Phi comparisons
PHI_LAZY = 8
PHI_EXACT = 9
# bivariate samplers
BIV_PROPOSALS = 10
BIV_ACCEPTS = 11
COMP_1 = 12
COMP_2 = 13
COMP_3 = 14
# multivariate chains
MV_ATTEMPTS = 15
MV_ACCEPTS = 16

NAMES = (
    "uni_proposals",
    "uni_fast",
    "uni_slow",
    "uni_tail",
    "uni_edge",
    "uni_texp",
    "uni_naive",
    "uni_devroye",
    "phi_lazy",
    "phi_exact",
    "biv_proposals",
    "biv_accepts",
    "comp_1",
    "comp_2",
    "comp_3",
    "mv_attempts",
    "mv_accepts",
)
SIZE = len(NAMES)


class Counters:
    """Mutable counter block; ``.array`` is what the kernels write into."""

    def __init__(self) -> None:
        self.array = np.zeros(SIZE, dtype=np.int64)

    def reset(self) -> None:
        self.array[:] = 0

    def __getitem__(self, name: str) -> int:
        return int(self.array[NAMES.index(name)])

    def as_dict(self) -> dict[str, int]:
        return {n: int(v) for n, v in zip(NAMES, self.array)}

    @property
    def table_acceptance(self) -> float:
        """Accepted draws over region proposals for the table sampler."""
        props = self.array[UNI_PROPOSALS]
        if props == 0:
            return float("nan")
        acc = self.array[UNI_FAST] + self.array[UNI_SLOW] + self.array[UNI_TAIL] + self.array[UNI_EDGE]
        return float(acc) / float(props)

    @property
    def fast_fraction(self) -> float:
        acc = self.array[UNI_FAST] + self.array[UNI_SLOW] + self.array[UNI_TAIL] + self.array[UNI_EDGE]
        if acc == 0:
            return float("nan")
        return float(self.array[UNI_FAST]) / float(acc)


def new() -> np.ndarray:
    return np.zeros(SIZE, dtype=np.int64)
