"""Independent reference implementations for cross-checking the package.

Everything here favors obviousness over speed: per-individual outcome
enumeration with itertools.product, dict-based convolution, subset
enumeration for the Prohorov metric, and a grid search for the
bounded-Lipschitz metric.  Tests compute expected values from these and
compare the fast implementations against them on small instances.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from scipy.ndimage import maximum_filter1d

# -- laws as plain dicts -------------------------------------------------------


def dict_convolve(a: dict[int, float], b: dict[int, float]) -> dict[int, float]:
    out: dict[int, float] = {}
    for x, p in a.items():
        for y, q in b.items():
            out[x + y] = out.get(x + y, 0.0) + p * q
    return out


def dict_power(pmf: dict[int, float], k: int) -> dict[int, float]:
    out = {0: 1.0}
    for _ in range(k):
        out = dict_convolve(out, pmf)
    return out


def sum_of_draws(pmf: dict[int, float], z: int) -> dict[int, float]:
    """Law of the sum of z draws by enumerating every outcome tuple.

    Full product enumeration blows up past a handful of draws, so larger z
    fall back to dict_power; the two are checked against each other where
    both are affordable, keeping the enumeration the ground truth.
    """
    if len(pmf) ** z > 200_000:
        return dict_power(pmf, z)
    out: dict[int, float] = {}
    items = sorted(pmf.items())
    for combo in itertools.product(items, repeat=z):
        total = sum(x for x, _ in combo)
        prob = 1.0
        for _, p in combo:
            prob *= p
        out[total] = out.get(total, 0.0) + prob
    return out


def path_law(pmf: dict[int, float], n: int, z0: int) -> dict[tuple[int, ...], float]:
    """Joint law of (Z_1, ..., Z_n) started from z0, by full path enumeration."""
    paths: dict[tuple[int, ...], float] = {(): 1.0}
    for _ in range(n):
        nxt: dict[tuple[int, ...], float] = {}
        for path, prob in paths.items():
            z = path[-1] if path else z0
            for total, p in sum_of_draws(pmf, z).items():
                key = path + (total,)
                nxt[key] = nxt.get(key, 0.0) + prob * p
        paths = nxt
    return paths


def generation_law(pmf: dict[int, float], n: int, z0: int) -> dict[int, float]:
    out: dict[int, float] = {}
    for path, prob in path_law(pmf, n, z0).items():
        out[path[-1]] = out.get(path[-1], 0.0) + prob
    return out


def joint_pairs(pmf: dict[int, float], n: int, z0: int) -> dict[tuple[int, int], float]:
    """Law of (Z_{n-1}, Z_n); Z_0 = z0 surely."""
    out: dict[tuple[int, int], float] = {}
    for path, prob in path_law(pmf, n, z0).items():
        prev = path[-2] if n >= 2 else z0
        key = (prev, path[-1])
        out[key] = out.get(key, 0.0) + prob
    return out


def ratio_law(
    pmf: dict[int, float], n: int, z0: int, conditioned: bool = False
) -> dict[Fraction, float]:
    """Law of Z_n / Z_{n-1} with the convention 0 on extinction."""
    out: dict[Fraction, float] = {}
    total = 0.0
    for (j, k), p in joint_pairs(pmf, n, z0).items():
        if j == 0:
            if conditioned:
                continue
            key = Fraction(0)
        else:
            key = Fraction(k, j)
        out[key] = out.get(key, 0.0) + p
        total += p
    if conditioned:
        out = {x: w / total for x, w in out.items()}
    return out


def trajectory_tv(
    pmf1: dict[int, float], pmf2: dict[int, float], n: int, z0: int
) -> float:
    p1 = path_law(pmf1, n, z0)
    p2 = path_law(pmf2, n, z0)
    keys = set(p1) | set(p2)
    return 0.5 * sum(abs(p1.get(key, 0.0) - p2.get(key, 0.0)) for key in keys)


def tv(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(key, 0.0) - b.get(key, 0.0)) for key in keys)


def deviation_mass(pmf: dict[int, float], k: int, eta: float) -> float:
    """P[|S_k/k - m| >= eta] for the sum S_k of k draws, via dict powers."""
    mean = sum(x * p for x, p in pmf.items())
    power = dict_power(pmf, k)
    return sum(p for total, p in power.items() if abs(total / k - mean) >= eta)


# -- metrics -------------------------------------------------------------------


def _one_sided_deficit(
    xs: np.ndarray, ws: np.ndarray, ys: np.ndarray, vs: np.ndarray, c: float
) -> float:
    """max over subsets A of supp(x) of  w(A) - v(A^c)."""
    na = len(xs)
    masks = (
        np.arange(1, 2**na)[:, None] >> np.arange(na)[None, :]
    ) & 1  # (2^na - 1, na)
    masks = masks.astype(bool)
    cover = np.abs(xs[:, None] - ys[None, :]) <= c + 1e-12  # (na, nb)
    a_mass = masks @ ws
    b_mass = ((masks @ cover.astype(np.int64)) > 0) @ vs
    return float(np.max(a_mass - b_mass))


def prohorov(
    xs: np.ndarray, ws: np.ndarray, ys: np.ndarray, vs: np.ndarray
) -> float:
    """Prohorov distance by subset enumeration over both supports.

    Uses the fact that the worst A is a subset of the left support and that
    the deficit is a nonincreasing step function of c with breakpoints at
    the pairwise distances: the answer is min over breakpoints d of
    max(d, deficit(d)).
    """
    xs, ws = np.asarray(xs, float), np.asarray(ws, float)
    ys, vs = np.asarray(ys, float), np.asarray(vs, float)
    dists = np.abs(xs[:, None] - ys[None, :]).ravel()
    candidates = np.unique(np.concatenate([[0.0], dists]))
    best = np.inf
    for c in candidates:
        deficit = max(
            _one_sided_deficit(xs, ws, ys, vs, c),
            _one_sided_deficit(ys, vs, xs, ws, c),
        )
        best = min(best, max(float(c), deficit))
    return best


def _bl_at_slope(
    points: np.ndarray, coeffs: np.ndarray, lip: float, grid: int
) -> float:
    """max of sum coeffs[i] h(points[i]) over h with ||h||_inf <= 1 - lip
    and Lipschitz constant <= lip, h sampled on a value grid."""
    bound = 1.0 - lip
    if bound <= 0.0:
        return 0.0
    values = np.linspace(-bound, bound, grid)
    step = values[1] - values[0]
    dp = coeffs[0] * values
    for i in range(1, len(points)):
        reach = lip * (points[i] - points[i - 1])
        width = int(reach / step)
        if width > 0:
            dp = maximum_filter1d(dp, size=2 * width + 1, mode="nearest")
        dp = dp + coeffs[i] * values
    return float(dp.max())


def bounded_lipschitz(
    xs: np.ndarray, ws: np.ndarray, ys: np.ndarray, vs: np.ndarray, grid: int = 4001
) -> float:
    """Grid-search bounded-Lipschitz metric on the line.

    Test functions are piecewise linear between the union support points;
    on the real line only adjacent-point slope constraints matter.  The
    value-grid makes each slope evaluation a sliding-window maximum; the
    slope itself is scanned coarsely and then refined around the best
    candidate (the value is concave in the slope).
    """
    points, coeffs = _signed_union(xs, ws, ys, vs)
    if len(points) == 1:
        return 0.0
    best = 0.0
    best_lip = 0.0
    for lip in np.linspace(0.0, 1.0, 101):
        val = _bl_at_slope(points, coeffs, float(lip), grid)
        if val > best:
            best, best_lip = val, float(lip)
    lo = max(0.0, best_lip - 0.01)
    hi = min(1.0, best_lip + 0.01)
    for lip in np.linspace(lo, hi, 101):
        best = max(best, _bl_at_slope(points, coeffs, float(lip), grid))
    return best


def _signed_union(
    xs: np.ndarray, ws: np.ndarray, ys: np.ndarray, vs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    acc: dict[float, float] = {}
    for x, w in zip(np.asarray(xs, float), np.asarray(ws, float)):
        acc[float(x)] = acc.get(float(x), 0.0) + w
    for y, v in zip(np.asarray(ys, float), np.asarray(vs, float)):
        acc[float(y)] = acc.get(float(y), 0.0) - v
    points = np.array(sorted(acc))
    coeffs = np.array([acc[p] for p in points])
    return points, coeffs
