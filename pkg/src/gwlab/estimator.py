"""Exact law of the offspring-mean ratio estimator Z_n / Z_{n-1}.

The estimator takes the value 0 when the previous generation is empty, so
its law is the pushforward of the consecutive-pair law under
``(j, k) -> k/j`` for ``j > 0`` together with the extinction atom at 0.
Ratios are reduced exactly with integer arithmetic before merging, so
``2/6`` and ``1/3`` land on the same atom.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .engine import JointLaw, condition_on_survival
from .errors import InvalidParameter
from .measures import DiscreteMeasure

__all__ = ["EstimatorLaw", "estimator_law", "consistency_probability"]


@dataclass(frozen=True)
class EstimatorLaw:
    """Law of Z_n / Z_{n-1}, optionally conditioned on Z_{n-1} > 0."""

    n: int
    z0: int
    conditioned: bool
    law: DiscreteMeasure

    @property
    def defect(self) -> float:
        return self.law.defect

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "z0": self.z0,
            "conditioned": self.conditioned,
            "law": self.law.to_json_dict(),
        }


def _merge_ratios(
    nums: np.ndarray, dens: np.ndarray, probs: np.ndarray, defect: float
) -> DiscreteMeasure:
    if nums.size == 0:
        raise InvalidParameter("no rows to build an estimator law from")
    if int(nums.max(initial=0)) < 2**31 and int(dens.max(initial=1)) < 2**31:
        pack = int(dens.max()) + 1
        keys = nums * pack + dens
        uniq, inverse = np.unique(keys, return_inverse=True)
        weights = np.bincount(inverse, weights=probs)
        unums = (uniq // pack).astype(np.int64)
        udens = (uniq % pack).astype(np.int64)
        order = np.lexsort((unums, udens, unums / udens))
        unums, udens, weights = unums[order], udens[order], weights[order]
        keep = weights != 0.0
        return DiscreteMeasure.from_sorted_arrays(
            unums[keep], udens[keep], weights[keep], defect
        )
    # Values too large to pack into one int64: fall back to exact Fractions.
    acc: dict[Fraction, float] = {}
    for num, den, p in zip(nums.tolist(), dens.tolist(), probs.tolist()):
        key = Fraction(num, den)
        acc[key] = acc.get(key, 0.0) + p
    return DiscreteMeasure.from_items(acc.items(), defect=defect)


def estimator_law(joint: JointLaw, conditioned: bool = False) -> EstimatorLaw:
    """Pushforward of a consecutive-pair law under the ratio map."""
    if conditioned:
        joint = condition_on_survival(joint).joint
    js = joint.prev
    ks = joint.curr
    ps = joint.probs
    nums = np.empty(len(js), dtype=np.int64)
    dens = np.empty(len(js), dtype=np.int64)
    alive = js > 0
    g = np.gcd(ks[alive], js[alive])
    nums[alive] = ks[alive] // g
    dens[alive] = js[alive] // g
    nums[~alive] = 0
    dens[~alive] = 1
    law = _merge_ratios(nums, dens, ps, joint.defect)
    return EstimatorLaw(n=joint.n, z0=joint.z0, conditioned=conditioned, law=law)


def consistency_probability(
    e: EstimatorLaw, m: object, eta: object
) -> tuple[float, float]:
    """Mass the estimator law puts at distance >= eta from m, with slack.

    When ``m`` and ``eta`` are given as Fractions the comparison is done in
    exact integer arithmetic, so boundary atoms (deviation exactly eta) are
    classified correctly; float inputs use float comparison.
    """
    law = e.law
    if isinstance(m, Fraction) and isinstance(eta, Fraction):
        if eta <= 0:
            raise InvalidParameter("deviation threshold eta must be positive")
        total = 0.0
        for x, w in law.items():
            if abs(x - m) >= eta:
                total += w
        return total, law.defect
    m_f = float(m)
    eta_f = float(eta)
    if eta_f <= 0.0:
        raise InvalidParameter("deviation threshold eta must be positive")
    mask = np.abs(law.float_support - m_f) >= eta_f
    return float(law.weights_array[mask].sum()), law.defect
