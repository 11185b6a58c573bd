"""The IDLA chain, its shifted version, smash sums and the water-level coupling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .lattice import CardinalityMismatch, Cluster, Grid, Site, check_width
from .rng import LANE_CHAIN, LANE_PAIRS, LANE_SMASH, LANE_WATER, RngFamily
from .walk import ReturnDistribution, precompute_return_distribution

Observer = Callable[[int, Site, Grid], None]


def as_family(rng: RngFamily | int, lane: int = LANE_CHAIN) -> RngFamily:
    if isinstance(rng, RngFamily):
        return rng
    return RngFamily(int(rng), 0, lane)


class ChainState:
    """A running IDLA chain.

    Particle ``t`` (counting from 0 over the chain's lifetime) draws from
    stream ``t`` of ``family``, so a chain's trajectory does not depend on how
    its run is chunked.
    """

    __slots__ = ("grid", "t", "family", "shifted", "rd", "_st")

    def __init__(
        self,
        cluster: Cluster,
        family: RngFamily | int,
        shifted: bool = False,
        t: int = 0,
        rd: ReturnDistribution | None = None,
    ):
        self.grid = Grid.from_cluster(cluster, headroom=max(64, 2 * cluster.n))
        self.family = as_family(family)
        self.shifted = shifted
        self.t = t
        self.rd = rd or precompute_return_distribution(cluster.n)
        self._st = np.zeros(4, dtype=np.uint64)
        if shifted:
            self.grid.downshift()

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def cluster(self) -> Cluster:
        return self.grid.to_cluster()

    @property
    def cumulative_shift(self) -> int:
        return self.grid.cumulative_shift

    def copy(self) -> "ChainState":
        c = ChainState.__new__(ChainState)
        c.grid = self.grid.copy()
        c.t, c.family, c.shifted, c.rd = self.t, self.family, self.shifted, self.rd
        c._st = np.zeros(4, dtype=np.uint64)
        return c

    def advance(self, count: int, sites: np.ndarray | None = None) -> None:
        """Release ``count`` particles; optional ``sites`` (count x 2) receives settle sites."""
        g, rd = self.grid, self.rd
        key = self.family.key
        done = 0
        buf = sites if sites is not None else np.empty((0, 2), dtype=np.int64)
        while done < count:
            view = buf[done:] if sites is not None else buf
            k = K.run_particles(
                g.occ, g.cnt, g.meta, g.n, rd.lam, rd.costab, rd.cdf,
                key, self.t, count - done, self.shifted, view, self._st,
            )
            self.t += k
            done += k
            if done < count:
                g.grow()

    def __repr__(self) -> str:
        return f"ChainState(n={self.n}, t={self.t}, base={self.grid.base}, top={self.grid.top}, shift={self.cumulative_shift})"


def add_particle(state: ChainState) -> Site:
    """Release one particle from a uniform point of level 0 and occupy its exit site.

    The state is updated in place; the settle site is returned.
    """
    out = np.empty((1, 2), dtype=np.int64)
    state.advance(1, out)
    return Site(int(out[0, 0]), int(out[0, 1]))


def shifted_step(state: ChainState) -> Site:
    """One step of the shifted chain (add a particle, then translate down by k_A)."""
    if not state.shifted:
        raise ValueError("shifted_step needs a ChainState created with shifted=True")
    return add_particle(state)


def run_idla(
    a0: Cluster,
    t: int,
    rng: RngFamily | int,
    observer: Observer | None = None,
    shifted: bool = False,
) -> Cluster:
    """Run the chain for ``t`` particles from ``a0`` and return the final cluster.

    ``observer(step, site, grid)`` is called after every particle with the
    1-based step index, the settle site and a live view of the grid.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    state = ChainState(a0, rng, shifted=shifted)
    if observer is None:
        state.advance(t)
    else:
        for step in range(1, t + 1):
            s = add_particle(state)
            observer(step, s, state.grid)
    return state.cluster


def run_chain(state: ChainState, checkpoints: Sequence[int], callback: Callable[[int, ChainState], None]) -> None:
    """Advance ``state`` and call ``callback(t, state)`` at each checkpoint time (ascending)."""
    for tc in checkpoints:
        if tc < state.t:
            raise ValueError("checkpoints must be ascending and not in the past")
        state.advance(tc - state.t)
        callback(tc, state)


def smash_sum(a: Cluster, b: Iterable[tuple[int, int]], rng: RngFamily | int) -> Cluster:
    """Left fold of the Diaconis-Fulton addition over the points of ``b`` in order.

    Point ``i`` walks with stream ``i`` of the family.
    """
    fam = as_family(rng, LANE_SMASH)
    pts = [(int(x), int(y)) for x, y in b]
    g = Grid.from_cluster(a, headroom=len(pts) + 16)
    rd = precompute_return_distribution(a.n)
    st = np.zeros(4, dtype=np.uint64)
    key = fam.key
    for i, (x, y) in enumerate(pts):
        if not 0 <= x < a.n:
            raise ValueError(f"x={x} outside [0, {a.n})")
        if g.is_occupied((x, y)):
            K.reset_stream(st, np.uint64(int(K.child_key(key, i))))
            x, y, _ = K.walk_settle(g.occ, g.meta, g.n, rd.lam, rd.costab, rd.cdf, st, x, y, True, K.NO_FLOOR)
        g.occupy((int(x), int(y)))
    return g.to_cluster()


@dataclass(frozen=True)
class CouplingOutcome:
    cluster1: Cluster
    cluster2: Cluster
    coupled: bool
    pairs_total: int
    pairs_met: int


def frozen_sites(a: Cluster) -> np.ndarray:
    """Sites of ``a`` above level 0, level ascending then x ascending."""
    pts = list(a.sites_above(0))
    return np.array(pts, dtype=np.int64).reshape(-1, 2)


def water_level_coupling(
    a0: Cluster,
    a0p: Cluster,
    t_water: int,
    rng: RngFamily | int,
    water: Cluster | None = None,
) -> CouplingOutcome:
    """Couple IDLA from ``a0`` and ``a0p`` through a common water cluster.

    ``W_0 = run_idla(R_0, t_water)`` is built once; then the frozen particles of
    the two starts are released in pairs into copies of ``W_0`` using the
    coupled walk.  By the Abelian property each output has the law of
    ``run_idla(a0, t_water)`` (and likewise for ``a0p``); both hold
    ``t_water + |a0|`` sites above level 0.  A precomputed ``water`` cluster
    may be passed.
    """
    n = check_width(a0.n)
    if a0p.n != n:
        raise ValueError("clusters have different widths")
    if a0.base < 0 or a0p.base < 0:
        raise ValueError("initial clusters must contain R_0")
    n0, n0p = a0.cardinality_above(0), a0p.cardinality_above(0)
    if n0 != n0p:
        raise CardinalityMismatch(f"|A0| = {n0} but |A0'| = {n0p}")
    fam = as_family(rng)
    if water is None:
        water = run_idla(Cluster.flat(n), t_water, fam.sub(LANE_WATER))
    s1, s2 = frozen_sites(a0), frozen_sites(a0p)
    h = max(a0.height(), a0p.height(), water.height())
    rows = h - water.base + n0 + 8
    g1 = Grid.from_cluster(water, headroom=rows)
    g2 = Grid.from_cluster(water, headroom=rows)
    rd = precompute_return_distribution(n)
    out = np.zeros((n0, 5), dtype=np.int64)
    st = np.zeros(4, dtype=np.uint64)
    done = K.release_pairs(
        g1.occ, g1.cnt, g1.meta, g2.occ, g2.cnt, g2.meta, n,
        rd.lam, rd.costab, rd.cdf, fam.sub(LANE_PAIRS).key, s1, s2, out, st,
    )
    if done != n0:  # pragma: no cover - headroom is sized for the worst case
        raise RuntimeError("grid capacity exhausted during pair release")
    c1, c2 = g1.to_cluster(), g2.to_cluster()
    return CouplingOutcome(c1, c2, c1 == c2, n0, int(out[:, 4].sum()))


def sample_final_clusters(
    a0: Cluster,
    t: int,
    count: int,
    seed: int,
    shifted: bool = False,
    rd: ReturnDistribution | None = None,
    lane: int = LANE_CHAIN,
) -> dict[Cluster, int]:
    """Empirical law of A(t) over ``count`` independent chains (replicate i uses family i)."""
    rd = rd or precompute_return_distribution(a0.n)
    start = Grid.from_cluster(a0.downshift() if shifted else a0, headroom=t + 8)
    st = np.zeros(4, dtype=np.uint64)
    none = np.empty((0, 2), dtype=np.int64)
    counts: dict[Cluster, int] = {}
    for i in range(count):
        g = start.copy()
        key = RngFamily(seed, i, lane).key
        K.run_particles(g.occ, g.cnt, g.meta, g.n, rd.lam, rd.costab, rd.cdf, key, 0, t, shifted, none, st)
        c = g.to_cluster()
        counts[c] = counts.get(c, 0) + 1
    return counts
