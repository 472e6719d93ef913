"""OSPA error with localization/cardinality decomposition.

Schuhmacher-Vo-Vo metric of order p with cutoff c on planar positions:
with n = max(|A|, |B|), m = min(|A|, |B|),

    total = ( (1/n) (assignment_cost + c^p (n - m)) )^(1/p)

where assignment_cost is the optimal (Hungarian) matching of cutoff
distances min(d, c)^p.  loc and card report the two summands, each
normalized by n and taken to the 1/p power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class OspaResult:
    total: float
    loc: float
    card: float
    c: float
    p: float


def ospa(estimates, truth, c: float = 100.0, p: float = 2.0) -> OspaResult:
    """OSPA distance between two finite sets of planar points.

    Symmetric in its arguments; both sets empty gives all-zero error; one
    empty set gives the pure cardinality penalty c.
    """
    if c <= 0:
        raise ValueError("cutoff c must be positive")
    if p < 1:
        raise ValueError("order p must be >= 1")
    A = np.asarray(list(estimates), dtype=float).reshape(-1, 2)
    B = np.asarray(list(truth), dtype=float).reshape(-1, 2)
    # canonical argument order makes the metric exactly symmetric (identical
    # arithmetic for either call order)
    if (A.shape[0], A.tobytes()) > (B.shape[0], B.tobytes()):
        A, B = B, A
    na, nb = A.shape[0], B.shape[0]
    n, m = max(na, nb), min(na, nb)
    if n == 0:
        return OspaResult(0.0, 0.0, 0.0, c, p)
    cost = 0.0
    if m > 0:
        dists = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=-1)
        D = np.minimum(dists, c) ** p
        rows, cols = linear_sum_assignment(D)
        cost = float(D[rows, cols].sum())
    card_raw = (c**p) * (n - m)
    total = ((cost + card_raw) / n) ** (1.0 / p)
    loc = (cost / n) ** (1.0 / p)
    card = (card_raw / n) ** (1.0 / p)
    return OspaResult(float(total), float(loc), float(card), c, p)
