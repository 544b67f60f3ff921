"""Exact finite-horizon laws of a branching process.

The population starts at ``z0`` individuals and each generation every
individual independently draws its offspring count from a common law.  The
law of the population size is propagated exactly: the next generation's law
is the mixture, over the current support, of convolution powers of the
offspring law.  All inner arithmetic runs on dense float arrays indexed by
population size; measures are materialized only at the API boundary.

Truncation discipline: a propagation with horizon ``n`` and budget ``b``
may move at most ``b / n`` of mass per step into the defect, always from the
largest population sizes.  Defect inherited from a truncated offspring law
is tracked as well, and crossing the total budget raises ``BudgetExceeded``
at the offending step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from . import offspring as offspring_mod
from .errors import (
    BudgetExceeded,
    DegenerateConditioning,
    InvalidParameter,
)
from .measures import DiscreteMeasure, _convolve_dense, _truncate_dense, convolution_power
from .offspring import OffspringLaw

__all__ = [
    "GenerationLaw",
    "JointLaw",
    "SurvivalConditioned",
    "PowerCache",
    "Propagator",
    "propagate",
    "extinction_by_n",
    "joint_law",
    "condition_on_survival",
    "wlln_probability",
]

DEFAULT_BUDGET = 1e-12

MIN_SURVIVAL = 1e-12


@dataclass(frozen=True)
class GenerationLaw:
    """Law of the population size after ``n`` generations from ``z0`` ancestors."""

    n: int
    z0: int
    law: DiscreteMeasure


@dataclass(eq=False)
class JointLaw:
    """Sparse joint law of two consecutive population sizes.

    Entry arrays are parallel: ``probs[i]`` is the probability that the
    sizes at generations ``n - 1`` and ``n`` equal ``prev[i]`` and
    ``curr[i]``.  Rows are sorted by ``(prev, curr)``.
    """

    n: int
    z0: int
    prev: np.ndarray
    curr: np.ndarray
    probs: np.ndarray
    defect: float

    def entries(self) -> dict[tuple[int, int], float]:
        return {
            (int(j), int(k)): float(p)
            for j, k, p in zip(self.prev, self.curr, self.probs)
        }

    def items(self) -> Iterator[tuple[int, int, float]]:
        for j, k, p in zip(self.prev, self.curr, self.probs):
            yield int(j), int(k), float(p)

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    def row_marginal(self) -> DiscreteMeasure:
        """Law of the earlier generation implied by the rows."""
        return _measure_from_value_sums(self.prev, self.probs, self.defect)

    def col_marginal(self) -> DiscreteMeasure:
        """Law of the later generation implied by the rows."""
        return _measure_from_value_sums(self.curr, self.probs, self.defect)


def _measure_from_value_sums(
    values: np.ndarray, probs: np.ndarray, defect: float
) -> DiscreteMeasure:
    order = np.argsort(values, kind="stable")
    vals = values[order]
    ps = probs[order]
    uniq, start = np.unique(vals, return_index=True)
    sums = np.add.reduceat(ps, start)
    return DiscreteMeasure.from_sorted_arrays(
        uniq.astype(np.int64), np.ones(len(uniq), dtype=np.int64), sums, defect
    )


class PowerCache:
    """Memoized convolution powers of an offspring law as dense arrays.

    ``get(j)`` returns ``(weights, defect)`` for the law of the sum of ``j``
    independent offspring draws.  Powers combine from cached pieces: a dense
    sweep over consecutive ``j`` costs one convolution each, an isolated
    large ``j`` is built by repeated halving.
    """

    def __init__(self, law: OffspringLaw, per_convolution_budget: float = 0.0):
        base = law.measure.dense_weights()
        self._cache: dict[int, tuple[np.ndarray, float]] = {
            0: (np.ones(1), 0.0),
            1: (base, law.measure.defect),
        }
        self._budget = per_convolution_budget
        self.truncated_mass = 0.0

    def get(self, j: int) -> tuple[np.ndarray, float]:
        if j < 0:
            raise InvalidParameter("convolution power needs j >= 0")
        hit = self._cache.get(j)
        if hit is not None:
            return hit
        anchor = max(i for i in self._cache if i <= j)
        if anchor > j // 2:
            left, right = anchor, j - anchor
        else:
            left, right = j // 2, j - j // 2
        wa, da = self.get(left)
        wb, db = self.get(right)
        w = _convolve_dense(wa, wb)
        w, dropped = _truncate_dense(w, self._budget)
        self.truncated_mass += dropped
        entry = (w, da + db + dropped)
        self._cache[j] = entry
        return entry


class Propagator:
    """Step-by-step propagation of the population-size law.

    Shares one :class:`PowerCache` across all horizons up to ``n_max`` so a
    sweep over generations pays for each convolution power once.
    """

    def __init__(
        self,
        law: OffspringLaw,
        z0: int = 1,
        n_max: int = 1,
        budget: float = DEFAULT_BUDGET,
    ):
        if z0 < 1:
            raise InvalidParameter("start size z0 must be at least 1")
        if n_max < 0:
            raise InvalidParameter("horizon must be nonnegative")
        self.law = law
        self.z0 = z0
        self.n_max = max(n_max, 1)
        self.budget = budget
        self.powers = PowerCache(law)
        start = np.zeros(z0 + 1)
        start[z0] = 1.0
        self._gen: list[tuple[np.ndarray, float]] = [(start, 0.0)]

    def _advance(self) -> None:
        prev, prev_defect = self._gen[-1]
        step = len(self._gen)
        support = np.nonzero(prev)[0]
        length = 1
        rows: list[tuple[int, np.ndarray]] = []
        for j in support.tolist():
            w, _ = self.powers.get(j)
            rows.append((j, w))
            length = max(length, len(w))
        out = np.zeros(length)
        inherited = prev_defect
        for j, w in rows:
            out[: len(w)] += prev[j] * w
            inherited += prev[j] * self.powers.get(j)[1]
        out, dropped = _truncate_dense(out, self.budget / self.n_max)
        defect = inherited + dropped
        if defect > self.budget * (1.0 + 1e-9):
            raise BudgetExceeded(
                f"defect {defect:.3e} exceeds budget {self.budget:.3e} "
                f"at generation {step}",
                step=step,
            )
        if out.size == 0:
            raise BudgetExceeded("truncation removed all mass", step=step)
        self._gen.append((out, defect))

    def _dense_generation(self, n: int) -> tuple[np.ndarray, float]:
        while len(self._gen) <= n:
            self._advance()
        return self._gen[n]

    def generation(self, n: int) -> GenerationLaw:
        w, defect = self._dense_generation(n)
        return GenerationLaw(n, self.z0, DiscreteMeasure.from_dense(w, defect=defect))

    def support_size(self, n: int) -> int:
        w, _ = self._dense_generation(n)
        return int(np.count_nonzero(w))

    def joint(self, n: int) -> JointLaw:
        """Joint law of the sizes at generations ``n - 1`` and ``n``."""
        if n < 1:
            raise InvalidParameter("a joint law needs n >= 1")
        prev, prev_defect = self._dense_generation(n - 1)
        support = np.nonzero(prev)[0]
        prev_col: list[np.ndarray] = []
        curr_col: list[np.ndarray] = []
        prob_col: list[np.ndarray] = []
        defect = prev_defect
        for j in support.tolist():
            if j == 0:
                prev_col.append(np.zeros(1, dtype=np.int64))
                curr_col.append(np.zeros(1, dtype=np.int64))
                prob_col.append(np.array([prev[0]]))
                continue
            w, d = self.powers.get(j)
            ks = np.nonzero(w)[0]
            prev_col.append(np.full(len(ks), j, dtype=np.int64))
            curr_col.append(ks.astype(np.int64))
            prob_col.append(prev[j] * w[ks])
            defect += prev[j] * d
        return JointLaw(
            n=n,
            z0=self.z0,
            prev=np.concatenate(prev_col),
            curr=np.concatenate(curr_col),
            probs=np.concatenate(prob_col),
            defect=float(defect),
        )


def propagate(
    law: OffspringLaw,
    n: int,
    z0: int = 1,
    budget: float = DEFAULT_BUDGET,
    method: str = "recursion",
) -> GenerationLaw:
    """Law of the population size after ``n`` generations.

    ``method="recursion"`` runs the mixture recursion from ``z0`` ancestors
    directly.  ``method="power"`` propagates a single ancestor and takes the
    ``z0``-fold convolution power of the result; the two agree within twice
    the budget and the tests hold them to that.
    """
    if method == "recursion":
        return Propagator(law, z0=z0, n_max=n, budget=budget).generation(n)
    if method == "power":
        single = Propagator(law, z0=1, n_max=n, budget=budget / 2).generation(n)
        if z0 == 1:
            return single
        combined = convolution_power(single.law, z0, budget=budget / 2)
        return GenerationLaw(n, z0, combined)
    raise InvalidParameter(f"unknown propagation method {method!r}")


def extinction_by_n(law: OffspringLaw, n: int, z0: int = 1) -> float:
    """Probability the population is extinct by generation ``n``.

    Computed by iterating the generating function at zero, which involves no
    truncation at all; it doubles as an oracle for the mass the propagated
    law puts at zero.
    """
    if z0 < 1:
        raise InvalidParameter("start size z0 must be at least 1")
    return offspring_mod.iterate_pgf_at_zero(law, n) ** z0


def joint_law(
    law: OffspringLaw,
    n: int,
    z0: int = 1,
    budget: float = DEFAULT_BUDGET,
) -> JointLaw:
    """Joint law of the sizes at generations ``n - 1`` and ``n``."""
    return Propagator(law, z0=z0, n_max=max(n - 1, 1), budget=budget).joint(n)


class SurvivalConditioned(NamedTuple):
    joint: JointLaw
    survival: float


def condition_on_survival(joint: JointLaw) -> SurvivalConditioned:
    """Condition a joint law on the earlier generation being positive.

    Rows with an extinct earlier generation are removed and the remaining
    mass renormalized; the normalizing constant (the survival probability
    of generation ``n - 1``) is returned alongside.
    """
    alive = joint.prev > 0
    survival = float(joint.probs[alive].sum())
    if survival < MIN_SURVIVAL:
        raise DegenerateConditioning(
            f"survival probability {survival:.3e} below {MIN_SURVIVAL}"
        )
    conditioned = JointLaw(
        n=joint.n,
        z0=joint.z0,
        prev=joint.prev[alive],
        curr=joint.curr[alive],
        probs=joint.probs[alive] / survival,
        defect=joint.defect / survival,
    )
    return SurvivalConditioned(conditioned, survival)


def wlln_probability(
    law: OffspringLaw,
    k: int,
    eta: float,
    _cache: PowerCache | None = None,
) -> tuple[float, float]:
    """Exact P[|S_k / k - m| >= eta] for a sum of k offspring draws.

    Returns ``(probability, slack)`` where the slack is the defect of the
    k-fold convolution power (mass whose deviation is unknown).
    """
    if k < 1:
        raise InvalidParameter("sample count k must be positive")
    if eta <= 0.0:
        raise InvalidParameter("deviation threshold eta must be positive")
    cache = _cache if _cache is not None else PowerCache(law)
    w, defect = cache.get(k)
    values = np.arange(len(w), dtype=float)
    mask = np.abs(values / k - law.mean_m) >= eta
    return float(w[mask].sum()), defect
