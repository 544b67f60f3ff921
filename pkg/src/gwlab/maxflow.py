"""Maximum matchable mass between two atom lists under a distance band.

This is the work-horse behind the Prohorov metric and Strassen couplings:
given atoms ``x_i`` with masses ``a_i`` and atoms ``y_j`` with masses
``b_j``, find the largest total mass that can be shipped along pairs with
``|x_i - y_j| <= eps``.  Because both supports are sorted, each left atom
sees a contiguous window of right atoms and the windows move monotonically,
so a single greedy sweep already produces a near-maximal (usually maximal)
flow; breadth-first augmenting paths finish the job and certify optimality.

Capacities are real-valued probabilities.  Residuals at or below
``FLOW_TERMINATION`` are treated as exhausted, which guarantees termination
at the cost of up to ``(n + m) * FLOW_TERMINATION`` of unreported flow,
far below every tolerance used by the callers.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverDidNotConverge

__all__ = ["FLOW_TERMINATION", "BAND_TOL", "band_windows", "BandFlow"]

FLOW_TERMINATION = 1e-14

BAND_TOL = 1e-12


def band_windows(
    xs: np.ndarray, ys: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Index windows [lo_i, hi_i) of right atoms within ``eps`` of each x_i.

    The band test is inclusive with an absolute tolerance so that an ``eps``
    taken from the list of pairwise distances admits the pair that produced
    it despite float rounding.
    """
    reach = eps + BAND_TOL
    lo = np.searchsorted(ys, xs - reach, side="left")
    hi = np.searchsorted(ys, xs + reach, side="right")
    return lo.astype(np.int64), hi.astype(np.int64)


class _SkipList:
    """Union-find 'next unvisited index' structure over 0..m."""

    def __init__(self, m: int):
        self.next = np.arange(m + 1, dtype=np.int64)

    def find(self, j: int) -> int:
        nxt = self.next
        root = j
        while nxt[root] != root:
            root = nxt[root]
        while nxt[j] != root:
            nxt[j], j = root, nxt[j]
        return root

    def remove(self, j: int) -> None:
        self.next[j] = j + 1


class BandFlow:
    """One max-flow problem at a fixed band width ``eps``."""

    def __init__(
        self,
        xs: np.ndarray,
        a: np.ndarray,
        ys: np.ndarray,
        b: np.ndarray,
        eps: float,
    ):
        self.lo, self.hi = band_windows(xs, ys, eps)
        self.excess = np.asarray(a, dtype=float).copy()
        self.resid = np.asarray(b, dtype=float).copy()
        self.n = len(self.excess)
        self.m = len(self.resid)
        # flow[i] maps right index -> mass; by_right[j] maps left index -> mass
        self.flow: list[dict[int, float]] = [{} for _ in range(self.n)]
        self.by_right: list[dict[int, float]] = [{} for _ in range(self.m)]

    # -- plumbing ------------------------------------------------------------

    def _add(self, i: int, j: int, amount: float) -> None:
        if amount == 0.0:
            return
        new = self.flow[i].get(j, 0.0) + amount
        if new <= FLOW_TERMINATION:
            self.flow[i].pop(j, None)
            self.by_right[j].pop(i, None)
        else:
            self.flow[i][j] = new
            self.by_right[j][i] = new

    # -- greedy staircase ------------------------------------------------------

    def _greedy(self) -> None:
        j = 0
        for i in range(self.n):
            need = self.excess[i]
            if need <= FLOW_TERMINATION:
                continue
            j = max(j, int(self.lo[i]))
            hi = int(self.hi[i])
            while need > FLOW_TERMINATION and j < hi:
                room = self.resid[j]
                if room <= FLOW_TERMINATION:
                    j += 1
                    continue
                take = min(need, room)
                self._add(i, j, take)
                self.resid[j] = room - take
                need -= take
            self.excess[i] = need

    # -- augmenting paths ------------------------------------------------------

    def _bfs(self, source: int) -> tuple[int, dict[int, int], dict[int, int]] | None:
        """Shortest alternating path source -> ... -> right node with room.

        Returns (target right, parent-of-right, parent-of-left) or None.
        """
        parent_r: dict[int, int] = {}
        parent_l: dict[int, int] = {}
        seen_left = np.zeros(self.n, dtype=bool)
        seen_left[source] = True
        skip = _SkipList(self.m)
        queue = [source]
        while queue:
            nxt_queue: list[int] = []
            for u in queue:
                j = skip.find(int(self.lo[u]))
                hi = int(self.hi[u])
                while j < hi:
                    parent_r[j] = u
                    if self.resid[j] > FLOW_TERMINATION:
                        return j, parent_r, parent_l
                    for w in self.by_right[j]:
                        if not seen_left[w]:
                            seen_left[w] = True
                            parent_l[w] = j
                            nxt_queue.append(w)
                    skip.remove(j)
                    j = skip.find(j + 1)
            queue = nxt_queue
        return None

    def _augment(self, source: int, found: tuple[int, dict[int, int], dict[int, int]]) -> None:
        target, parent_r, parent_l = found
        # Walk back to the source collecting the forward edges of the
        # alternating path; the backward edge between path[s] and path[s+1]
        # joins the left node of the former to the right node of the latter.
        path: list[tuple[int, int]] = []
        j = target
        while True:
            i = parent_r[j]
            path.append((i, j))
            if i == source:
                break
            j = parent_l[i]
        amount = min(self.excess[source], self.resid[target])
        for s in range(len(path) - 1):
            amount = min(amount, self.flow[path[s][0]][path[s + 1][1]])
        for s, (i, j) in enumerate(path):
            self._add(i, j, amount)
            if s + 1 < len(path):
                self._add(i, path[s + 1][1], -amount)
        self.excess[source] -= amount
        self.resid[target] -= amount

    def solve(self) -> float:
        """Run greedy + augmentation; returns the matched mass."""
        self._greedy()
        limit = 1000 + 20 * (self.n + self.m)
        rounds = 0
        while True:
            progressed = False
            for i in range(self.n):
                while self.excess[i] > FLOW_TERMINATION:
                    found = self._bfs(i)
                    if found is None:
                        break
                    self._augment(i, found)
                    progressed = True
                    rounds += 1
                    if rounds > limit:
                        raise SolverDidNotConverge(
                            f"band flow exceeded {limit} augmentations"
                        )
            if not progressed:
                break
        return self.matched_mass()

    def matched_mass(self) -> float:
        total = 0.0
        for row in self.flow:
            total += sum(row.values())
        return total

    def edges(self) -> dict[tuple[int, int], float]:
        out: dict[tuple[int, int], float] = {}
        for i, row in enumerate(self.flow):
            for j, v in row.items():
                out[(i, j)] = v
        return out
