"""Simple random walk on the cylinder and the two-walker coupling.

Walks started inside a cluster are simulated step by step above the filled
base.  Every down-step attempted from the base level is replaced by a single
macro-jump: the walker returns to the same level at a horizontal offset drawn
from the exact first-return law (:class:`ReturnDistribution`).  Walkers that
start strictly below the base are lifted to the base level in one draw from
the d-level hitting kernel.  Both replacements are exact in law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .lattice import Cluster, Grid, InvalidWidth, Site, StartVacant, check_width
from .rng import RngStream


def eigenvalues(n: int) -> np.ndarray:
    """lam[k] in (0, 1], the root of lam + 1/lam = 4 - 2 cos(2 pi k / n)."""
    k = np.arange(n)
    c = 2.0 - np.cos(2.0 * np.pi * k / n)
    # c - sqrt(c^2 - 1) written as 1 / (c + sqrt(c^2 - 1)) to avoid cancellation
    lam = 1.0 / (c + np.sqrt(np.maximum(c * c - 1.0, 0.0)))
    lam[0] = 1.0
    return lam


def cos_table(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.cos(2.0 * np.pi * np.outer(k, k) / n)


def hitting_kernel(n: int, d: int) -> np.ndarray:
    """Law of the horizontal offset when first climbing ``d`` levels through a full half-cylinder."""
    lam = eigenvalues(n) ** d
    p = cos_table(n).T @ lam / n
    p = np.maximum(p, 0.0)
    return p / p.sum()


@dataclass(frozen=True)
class ReturnDistribution:
    """First-return offset law after a down-step into a filled half-cylinder."""

    n: int
    probs: np.ndarray
    lam: np.ndarray = field(repr=False)
    costab: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)

    def __getitem__(self, j: int) -> float:
        return float(self.probs[j % self.n])

    def corrupted(self, eps: float = 0.05) -> "ReturnDistribution":
        """A deliberately wrong copy, for negative controls."""
        p = self.probs.copy()
        p[0] += eps
        p[1 % self.n] -= min(eps, p[1 % self.n])
        p /= p.sum()
        return _build(self.n, p, self.lam, self.costab)


def _build(n, probs, lam, costab) -> ReturnDistribution:
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    for a in (probs, lam, costab, cdf):
        a.setflags(write=False)
    return ReturnDistribution(n, probs, lam, costab, cdf)


@lru_cache(maxsize=64)
def precompute_return_distribution(n: int) -> ReturnDistribution:
    try:
        n = check_width(n)
    except InvalidWidth:
        raise
    lam = eigenvalues(n)
    costab = cos_table(n)
    p = costab.T @ lam / n
    p = np.maximum(p, 0.0)
    p /= p.sum()
    return _build(n, p, lam, costab)


_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def srw_step(s: Site, rng: RngStream, n: int) -> Site:
    dx, dy = _STEPS[rng.direction()]
    return Site((s[0] + dx) % n, s[1] + dy)


def _require_occupied(a: Cluster | Grid, s) -> None:
    if not a.is_occupied(s):
        raise StartVacant(f"start {tuple(s)} is not in the cluster")


def walk_until_settle(
    a: Cluster | Grid,
    start: tuple[int, int],
    rng: RngStream,
    contract: bool = True,
    rd: ReturnDistribution | None = None,
    floor: int | None = None,
) -> Site:
    """First vacant site reached by a simple random walk started at ``start``.

    ``floor`` (uncontracted walks only) rejects down-steps attempted at that
    level, which reproduces a truncated half-cylinder.
    """
    _require_occupied(a, start)
    g = Grid.from_cluster(a, headroom=8) if isinstance(a, Cluster) else a
    rd = rd or precompute_return_distribution(g.n)
    x, y, _ = K.walk_settle(
        g.occ, g.meta, g.n, rd.lam, rd.costab, rd.cdf, rng.state, int(start[0]), int(start[1]), bool(contract), _floor(floor, start[1])
    )
    return Site(int(x), int(y))


def _floor(floor: int | None, y: int) -> int:
    if floor is None:
        return K.NO_FLOOR
    if floor > y:
        raise ValueError(f"start level {y} lies below floor {floor}")
    return int(floor)


def settle_samples(
    a: Cluster,
    start: tuple[int, int] | None,
    count: int,
    family_key: np.uint64,
    contract: bool = True,
    rd: ReturnDistribution | None = None,
    level: int = 0,
    floor: int | None = None,
) -> np.ndarray:
    """``count`` independent settle sites as an int64 array of shape (count, 2).

    ``start=None`` releases each walk from a uniform point of ``level``.
    Without contraction the run time of a single walk has infinite mean; a
    ``floor`` (see :func:`walk_until_settle`) makes it finite.
    """
    g = Grid.from_cluster(a, headroom=8)
    rd = rd or precompute_return_distribution(g.n)
    if start is not None:
        _require_occupied(a, start)
        x0, y0, uniform = int(start[0]), int(start[1]), False
    else:
        _require_occupied(a, (0, level))
        x0, y0, uniform = 0, int(level), True
    out = np.empty((count, 2), dtype=np.int64)
    fl = _floor(floor, y0)
    K.sample_settles(g.occ, g.meta, g.n, rd.lam, rd.costab, rd.cdf, family_key, x0, y0, uniform, bool(contract), fl, count, out)
    return out


def coupled_settle_pair(
    a: Cluster | Grid,
    a2: Cluster | Grid,
    start1: tuple[int, int],
    start2: tuple[int, int],
    rng: RngStream,
    rd: ReturnDistribution | None = None,
) -> tuple[Site, Site, bool]:
    """Release two walkers under the vertical-sync / reflection coupling.

    Returns both settle sites and whether the walkers met before either exited.
    """
    _require_occupied(a, start1)
    _require_occupied(a2, start2)
    if a.n != a2.n:
        raise InvalidWidth("clusters have different widths")
    g1 = Grid.from_cluster(a, headroom=8) if isinstance(a, Cluster) else a
    g2 = Grid.from_cluster(a2, headroom=8) if isinstance(a2, Cluster) else a2
    rd = rd or precompute_return_distribution(g1.n)
    x1, y1, x2, y2, met, _ = K.coupled_pair(
        g1.occ, g1.meta, g2.occ, g2.meta, g1.n, rd.lam, rd.costab, rd.cdf, rng.state,
        int(start1[0]), int(start1[1]), int(start2[0]), int(start2[1]),
    )
    return Site(int(x1), int(y1)), Site(int(x2), int(y2)), bool(met)


# vertical hitting times of a free walk

def _tail_tau1(k: int) -> float:
    """P(tau_hat_1 >= 2k + 1) = C(2k, k) / 4**k for the vertical skeleton walk."""
    if k == 0:
        return 1.0
    return math.exp(math.lgamma(2 * k + 1) - 2 * math.lgamma(k + 1) - 2 * k * math.log(2.0))


def _sample_tau1(u: float) -> int:
    """Inverse transform for the first passage of +-1 walk to level 1 (odd values)."""
    # find the largest k with tail(k) > u; then tau = 2k + 1
    if _tail_tau1(1) <= u:
        return 1
    lo, hi = 1, 2
    while _tail_tau1(hi) > u:
        lo, hi = hi, hi * 2
        if hi > 1 << 62:
            break
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _tail_tau1(mid) > u:
            lo = mid
        else:
            hi = mid
    return 2 * lo + 1


_TAU_TABLE_K = 1 << 20


@lru_cache(maxsize=1)
def _tau_tail_table() -> np.ndarray:
    # tail[k] = C(2k, k) / 4^k via the ratio tail[k] / tail[k-1] = (2k - 1) / (2k)
    k = np.arange(1, _TAU_TABLE_K + 1, dtype=float)
    tail = np.empty(_TAU_TABLE_K + 1)
    tail[0] = 1.0
    tail[1:] = np.exp(np.cumsum(np.log1p(-0.5 / k)))
    return tail


def sample_tau1_batch(count: int, rng: RngStream) -> np.ndarray:
    """``count`` i.i.d. first-passage times of the +-1 walk to level +1."""
    tail = _tau_tail_table()
    u = 1.0 - rng.numpy_generator().random(count)  # in (0, 1]
    # largest k with tail[k] > u; tail is decreasing so search the reversed array
    k = tail.size - np.searchsorted(tail[::-1], u, side="right") - 1
    out = 2 * k + 1
    far = np.flatnonzero(u <= tail[-1])
    for i in far:
        out[i] = _sample_tau1(float(u[i]))
    return out.astype(np.int64)


def sample_vertical_hitting_time(n_levels: int, rng: RngStream) -> tuple[int, int]:
    """Sample (total steps, vertical moves) for a free walk to first reach level ``n_levels``.

    The vertical skeleton is a +-1 walk; its hitting time of ``n_levels`` is a sum
    of ``n_levels`` independent first-passage times to +1.  Each vertical move is
    preceded by a Geometric(1/2) number of horizontal moves, so the total is the
    vertical count plus a negative binomial.
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    vertical = 0
    for _ in range(n_levels):
        u = rng.random()
        vertical += _sample_tau1(1.0 - u if u > 0.0 else 1.0)
    horizontal = int(rng.numpy_generator().negative_binomial(vertical, 0.5))
    return vertical + horizontal, vertical


def sample_horizontal_gaps(count: int, rng: RngStream) -> np.ndarray:
    """Steps G_i up to and including each vertical move of a free walk (i.i.d., mean 2)."""
    out = np.empty(count, dtype=np.int64)
    K.horizontal_gaps(rng.state, count, out)
    return out


def sample_directions(count: int, rng: RngStream) -> np.ndarray:
    out = np.empty(count, dtype=np.int64)
    K.sample_directions(rng.state, count, out)
    return out
