"""Forward simulation of the branching recursion at scale.

Replications are processed in fixed-size chunks of 4096; chunk ``i`` draws
from ``default_rng(SeedSequence([seed, i]))``, so the output is a pure
function of the seed and is identical no matter how chunks are scheduled
across workers.  Within a chunk each generation is drawn either
individual-by-individual through the inverse CDF (small populations) or as
one multinomial split per replication (large populations with a narrow
offspring support); both produce the offspring-sum law exactly.

Replications whose population passes the cap stop being tabulated from the
offending generation on; per-generation exclusion counts are part of the
result, never silently dropped.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConditioning, InvalidParameter
from .estimator import _merge_ratios
from .measures import DiscreteMeasure
from .offspring import OffspringLaw

__all__ = ["SimConfig", "SimTable", "simulate_paths", "empirical_estimator_law"]

CHUNK = 4096

INDIV_LIMIT = 1 << 18

MULTINOMIAL_SUPPORT_LIMIT = 4096

_INDIV_HARD_LIMIT = 1 << 24


@dataclass(frozen=True)
class SimConfig:
    seed: int
    replications: int
    n_max: int
    z0: int = 1
    cap: int = 10_000_000

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise InvalidParameter("need at least one replication")
        if self.n_max < 1:
            raise InvalidParameter("horizon n_max must be at least 1")
        if self.z0 < 1:
            raise InvalidParameter("start size z0 must be at least 1")
        if self.cap < self.z0:
            raise InvalidParameter("population cap must be at least z0")


@dataclass
class SimTable:
    """Aggregated (Z_{n-1}, Z_n) pair counts per generation."""

    cfg: SimConfig
    levels: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]
    excluded: np.ndarray  # excluded[n] = replications missing at level n

    def included(self, n: int) -> int:
        return self.cfg.replications - int(self.excluded[n])

    def pairs(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if n not in self.levels:
            raise InvalidParameter(f"level {n} was not simulated")
        return self.levels[n]

    def rows(self):
        """Yields (n, z_prev, z, count) in deterministic order."""
        for n in sorted(self.levels):
            prev, curr, counts = self.levels[n]
            for j, k, c in zip(prev.tolist(), curr.tolist(), counts.tolist()):
                yield n, j, k, c

    def equals(self, other: "SimTable") -> bool:
        if sorted(self.levels) != sorted(other.levels):
            return False
        if not np.array_equal(self.excluded, other.excluded):
            return False
        for n in self.levels:
            for mine, theirs in zip(self.levels[n], other.levels[n]):
                if not np.array_equal(mine, theirs):
                    return False
        return True


def _group_pairs(
    prev: np.ndarray, curr: np.ndarray, counts: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Aggregate duplicate (prev, curr) pairs; output sorted by pair."""
    if prev.size == 0:
        return prev, curr, counts
    hi = max(int(prev.max()), int(curr.max()))
    if hi < 2**31:
        pack = np.int64(hi) + 1
        keys = prev * pack + curr
        uniq, inverse = np.unique(keys, return_inverse=True)
        sums = np.bincount(inverse, weights=counts.astype(float))
        return (uniq // pack).astype(np.int64), (uniq % pack).astype(np.int64), np.rint(sums).astype(np.int64)
    stacked = np.empty(prev.size, dtype=[("a", "<i8"), ("b", "<i8")])
    stacked["a"] = prev
    stacked["b"] = curr
    uniq, inverse = np.unique(stacked, return_inverse=True)
    sums = np.bincount(inverse, weights=counts.astype(float))
    return uniq["a"].copy(), uniq["b"].copy(), np.rint(sums).astype(np.int64)


def _draw_next(
    rng: np.random.Generator,
    pos: np.ndarray,
    support: np.ndarray,
    pvals: np.ndarray,
    cum: np.ndarray,
) -> np.ndarray:
    """Offspring sums for populations ``pos``, one entry per replication."""
    total = int(pos.sum())
    if total <= INDIV_LIMIT or len(support) > MULTINOMIAL_SUPPORT_LIMIT:
        if total > _INDIV_HARD_LIMIT:
            raise InvalidParameter(
                "population too large for individual draws and support too "
                "wide for multinomial splitting"
            )
        u = rng.random(total)
        kids = support[np.searchsorted(cum, u, side="right")]
        rep = np.repeat(np.arange(pos.size), pos)
        sums = np.bincount(rep, weights=kids.astype(float), minlength=pos.size)
        return np.rint(sums).astype(np.int64)
    table = rng.multinomial(pos, pvals)
    return table @ support


def _simulate_chunk(
    law: OffspringLaw, cfg: SimConfig, chunk_idx: int, size: int
) -> tuple[dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]], np.ndarray]:
    support = law.measure.integer_values
    pvals = law.measure.weights_array / law.measure.total_mass
    cum = np.cumsum(pvals)
    cum[-1] = 1.0
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, chunk_idx]))

    z = np.full(size, cfg.z0, dtype=np.int64)
    excluded = np.zeros(size, dtype=bool)
    levels: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    exc_counts = np.zeros(cfg.n_max + 1, dtype=np.int64)

    for step in range(1, cfg.n_max + 1):
        active = ~excluded
        zprev = z.copy()
        draw = np.nonzero(active & (z > 0))[0]
        if draw.size:
            z[draw] = _draw_next(rng, z[draw], support, pvals, cum)
        newly = active & (z > cfg.cap)
        excluded |= newly
        keep = active & ~newly
        exc_counts[step] = size - int(keep.sum())
        ones = np.ones(int(keep.sum()), dtype=np.int64)
        levels[step] = _group_pairs(zprev[keep], z[keep], ones)
    return levels, exc_counts


def _chunk_sizes(replications: int) -> list[int]:
    full, rest = divmod(replications, CHUNK)
    sizes = [CHUNK] * full
    if rest:
        sizes.append(rest)
    return sizes


def _run_chunk(args: tuple[OffspringLaw, SimConfig, int, int]):
    return _simulate_chunk(*args)


def simulate_paths(law: OffspringLaw, cfg: SimConfig, jobs: int = 1) -> SimTable:
    """Simulate the branching recursion; see the module notes on determinism."""
    if not law.measure.is_integer_supported:
        raise InvalidParameter("offspring law must have integer support")
    sizes = _chunk_sizes(cfg.replications)
    tasks = [(law, cfg, idx, size) for idx, size in enumerate(sizes)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_chunk, tasks, chunksize=8))
    else:
        results = [_run_chunk(t) for t in tasks]

    excluded = np.zeros(cfg.n_max + 1, dtype=np.int64)
    merged: dict[int, list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {
        n: [] for n in range(1, cfg.n_max + 1)
    }
    for levels, exc in results:
        excluded += exc
        for n, triple in levels.items():
            merged[n].append(triple)
    final: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for n, triples in merged.items():
        prev = np.concatenate([t[0] for t in triples])
        curr = np.concatenate([t[1] for t in triples])
        counts = np.concatenate([t[2] for t in triples])
        final[n] = _group_pairs(prev, curr, counts)
    return SimTable(cfg=cfg, levels=final, excluded=excluded)


def empirical_estimator_law(
    table: SimTable, n: int, conditioned: bool = False
) -> DiscreteMeasure:
    """Relative-frequency law of Z_n / Z_{n-1} with exactly reduced ratios."""
    prev, curr, counts = table.pairs(n)
    if conditioned:
        mask = prev > 0
        prev, curr, counts = prev[mask], curr[mask], counts[mask]
    total = int(counts.sum())
    if total == 0:
        raise DegenerateConditioning(f"no tabulated replications at level {n}")
    nums = np.empty(prev.size, dtype=np.int64)
    dens = np.empty(prev.size, dtype=np.int64)
    alive = prev > 0
    g = np.gcd(curr[alive], prev[alive])
    nums[alive] = curr[alive] // g
    dens[alive] = prev[alive] // g
    nums[~alive] = 0
    dens[~alive] = 1
    return _merge_ratios(nums, dens, counts / total, 0.0)
