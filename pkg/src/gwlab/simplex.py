"""Dense tableau simplex for small linear programs.

Solves  maximize c.x  subject to  A x <= b,  x >= 0  with b >= 0, which is
exactly the shape of the bounded-Lipschitz dual program: the all-slack basis
is feasible, so no phase-one is needed.  Pivoting uses Bland's rule, which
is slow in theory and entirely fine at the sizes we feed it, and rules out
cycling on the degenerate vertices these programs have in abundance.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameter, SimplexIterationLimit, SimplexUnbounded

__all__ = ["maximize"]

MAX_ITERATIONS = 10_000

_PIVOT_EPS = 1e-11


def maximize(
    c: np.ndarray, a: np.ndarray, b: np.ndarray
) -> tuple[float, np.ndarray]:
    """Returns (optimal value, optimal x)."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    if b.min(initial=0.0) < 0.0:
        raise InvalidParameter("rhs must be nonnegative for the slack basis to work")

    # Tableau layout: columns [x (n), slacks (m), rhs]; last row is the
    # objective in reduced-cost form (we minimize -c.x).
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = a
    t[:m, n : n + m] = np.eye(m)
    t[:m, -1] = b
    t[-1, :n] = -c
    basis = np.arange(n, n + m)

    for _ in range(MAX_ITERATIONS):
        reduced = t[-1, :-1]
        entering_candidates = np.nonzero(reduced < -_PIVOT_EPS)[0]
        if entering_candidates.size == 0:
            x = np.zeros(n + m)
            x[basis] = t[:m, -1]
            return float(t[-1, -1]), x[:n]
        col = int(entering_candidates[0])  # Bland: smallest index

        ratios = np.full(m, np.inf)
        positive = t[:m, col] > _PIVOT_EPS
        ratios[positive] = t[:m, -1][positive] / t[:m, col][positive]
        best = ratios.min()
        if not np.isfinite(best):
            raise SimplexUnbounded("objective is unbounded above")
        # Bland again: among the tied rows, leave the smallest basis index.
        # The additive tolerance keeps the minimizing row in the tied set even
        # when rounding drift makes best a tiny negative number.
        tied = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
        row = int(tied[np.argmin(basis[tied])])

        pivot = t[row, col]
        t[row] /= pivot
        for r in range(m + 1):
            if r != row and t[r, col] != 0.0:
                t[r] -= t[r, col] * t[row]
        basis[row] = col

    raise SimplexIterationLimit(f"no optimum after {MAX_ITERATIONS} pivots")
