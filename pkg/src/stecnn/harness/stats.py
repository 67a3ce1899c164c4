"""Mann-Whitney U test with an exact small-sample branch."""
import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..metrics import average_ranks

EXACT_MAX_N = 12
ALPHA = 0.05


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float
    method: str

    @property
    def significant(self):
        return self.p < ALPHA


def mann_whitney_u(a, b, method="auto"):
    """Two-sided Mann-Whitney U test; ``u`` is the statistic of sample ``a``.

    Ties get average ranks. With ``method="auto"`` the null distribution is
    enumerated exactly when len(a) + len(b) <= 12, otherwise a normal
    approximation with tie and continuity corrections is used.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    na, nb = a.size, b.size
    n = na + nb
    ranks = average_ranks(np.concatenate([a, b]))
    offset = na * (na + 1) / 2.0
    u = float(ranks[:na].sum() - offset)
    mu = na * nb / 2.0
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "normal"
    if method == "exact":
        observed = abs(u - mu)
        extreme = 0
        total = 0
        for combo in itertools.combinations(range(n), na):
            uc = ranks[list(combo)].sum() - offset
            extreme += abs(uc - mu) >= observed - 1e-9
            total += 1
        return MannWhitneyResult(u, min(1.0, extreme / total), "exact")
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float((counts ** 3 - counts).sum()) / (n * (n - 1))
    var = na * nb / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return MannWhitneyResult(u, 1.0, "normal")
    z = max(0.0, abs(u - mu) - 0.5) / math.sqrt(var)
    return MannWhitneyResult(u, min(1.0, math.erfc(z / math.sqrt(2))), "normal")
