"""Exact laws for tiny instances by absorbing-chain linear algebra.

The lower half-cylinder is truncated at level ``-depth``; a down-step
attempted there is rejected (the walker stays put).  Full levels are
eliminated with a level-to-level hitting kernel

    Q_y[x, x'] = P(first visit to level y+1 is at x' | start (x, y)),

which satisfies ``Q_y = (4 I - S - S^-1 - D_y)^{-1}`` with ``D = I`` at the
bottom level and ``D_y = Q_{y-1}`` above it.  What remains is a small system
over the occupied sites at or above the filled base.

Arithmetic is either float64 or exact rationals (``exact=True``).  With exact
arithmetic the results are exact for the truncated chain, which is what the
order-invariance tests rely on.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .lattice import Cluster, IDLAError, Site, StartVacant, check_width

DEFAULT_DEPTH = 200
STATE_CAP = 100_000
CLUSTER_CAP = 10_000
_SPARSE_FROM = 1500


class TooLarge(IDLAError):
    pass


# small exact linear algebra

def _frac_solve(a: list[list[Fraction]], b: list[list[Fraction]]) -> list[list[Fraction]]:
    """Solve ``a X = b`` by Gauss-Jordan elimination over the rationals."""
    m = len(a)
    k = len(b[0]) if b else 0
    aug = [list(a[i]) + list(b[i]) for i in range(m)]
    for c in range(m):
        p = next((r for r in range(c, m) if aug[r][c] != 0), None)
        if p is None:
            raise ZeroDivisionError("singular system")
        aug[c], aug[p] = aug[p], aug[c]
        piv = aug[c][c]
        row = [v / piv for v in aug[c]]
        aug[c] = row
        for r in range(m):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [v - f * w for v, w in zip(aug[r], row)]
    return [aug[i][m : m + k] for i in range(m)]


def _frac_inv(a: list[list[Fraction]]) -> list[list[Fraction]]:
    m = len(a)
    eye = [[Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    return _frac_solve(a, eye)


def _frac_matmul(a, b):
    return [[sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0)) for j in range(len(b[0]))] for i in range(len(a))]


# level elimination

@lru_cache(maxsize=256)
def _level_kernels(n: int, levels: int, exact: bool) -> tuple:
    """Q_{-depth}, ..., Q_{-depth+levels-1} for a bottom at ``-depth``."""
    out = []
    if exact:
        d = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        for _ in range(levels):
            m = [[Fraction(0)] * n for _ in range(n)]
            for i in range(n):
                m[i][i] += 4
                m[i][(i + 1) % n] -= 1
                m[i][(i - 1) % n] -= 1
                for j in range(n):
                    m[i][j] -= d[i][j]
            q = _frac_inv(m)
            out.append(tuple(tuple(r) for r in q))
            d = q
    else:
        eye = np.eye(n)
        shift = np.roll(eye, 1, axis=1) + np.roll(eye, -1, axis=1)
        d = eye
        for _ in range(levels):
            q = np.linalg.inv(4.0 * eye - shift - d)
            q.setflags(write=False)
            out.append(q)
            d = q
    return tuple(out)


def level_kernel(n: int, y: int, depth: int, exact: bool = False):
    """Q_y for the strip truncated at ``-depth`` (y >= -depth)."""
    if y < -depth:
        raise ValueError("level below the truncation")
    return _level_kernels(n, y + depth + 1, exact)[y + depth]


def lift_to_level(n: int, x: int, y: int, target: int, depth: int, exact: bool = False):
    """Law of the horizontal position on first reaching level ``target`` from (x, y), y <= target."""
    if exact:
        v = [[Fraction(int(j == x)) for j in range(n)]]
        for lev in range(y, target):
            v = _frac_matmul(v, [list(r) for r in level_kernel(n, lev, depth, True)])
        return v[0]
    v = np.zeros(n)
    v[x] = 1.0
    for lev in range(y, target):
        v = v @ level_kernel(n, lev, depth)
    return v


# exit distributions

@dataclass
class ExitDistribution(Mapping):
    """Law of the exit site, with a bound on the chance of touching the truncation."""

    probs: dict[Site, float | Fraction]
    truncation_bound: float = 0.0
    depth: int = DEFAULT_DEPTH

    def __getitem__(self, s) -> float | Fraction:
        return self.probs.get(Site(*s), 0)

    def __iter__(self) -> Iterator[Site]:
        return iter(self.probs)

    def __len__(self) -> int:
        return len(self.probs)

    def total(self):
        return sum(self.probs.values())


@dataclass
class _Solved:
    """Exit laws from every site of the base level and above, for one cluster."""

    n: int
    base: int
    index: dict[Site, int]
    exits: list[Site]
    h: object  # (unknowns x exits) array or nested lists of Fractions
    exact: bool
    depth: int


def _interior_count(a: Cluster, depth: int) -> int:
    return a.n * (a.base + depth + 1) + a.cardinality_above(a.base)


def _solve_cluster(a: Cluster, depth: int, exact: bool, cap: int) -> _Solved:
    n = a.n
    if a.base < -depth:
        raise ValueError("cluster base below the truncation depth")
    if _interior_count(a, depth) > cap:
        raise TooLarge(f"{_interior_count(a, depth)} interior states exceed cap {cap}")
    base = a.base
    unknowns = [Site(x, base) for x in range(n)] + list(a.sites_above(base))
    index = {s: i for i, s in enumerate(unknowns)}
    exit_index: dict[Site, int] = {}
    rows: list[dict[int, object]] = []
    rhs: list[dict[int, object]] = []
    qdown = level_kernel(n, base - 1, depth, exact) if base - 1 >= -depth else None
    quarter = Fraction(1, 4) if exact else 0.25
    for s in unknowns:
        r: dict[int, object] = {}
        e: dict[int, object] = {}
        nbrs = [Site((s.x + 1) % n, s.y), Site((s.x - 1) % n, s.y), Site(s.x, s.y + 1)]
        if s.y > base:
            nbrs.append(Site(s.x, s.y - 1))
        for t in nbrs:
            if a.is_occupied(t):
                j = index[t]
                r[j] = r.get(j, 0) + quarter
            else:
                j = exit_index.setdefault(t, len(exit_index))
                e[j] = e.get(j, 0) + quarter
        if s.y == base:
            if qdown is None:  # bottom of the strip: the down-step is rejected
                j = index[s]
                r[j] = r.get(j, 0) + quarter
            else:
                for x2 in range(n):
                    w = qdown[s.x][x2]
                    if w != 0:
                        j = index[Site(x2, base)]
                        r[j] = r.get(j, 0) + quarter * w
        rows.append(r)
        rhs.append(e)
    m, k = len(unknowns), len(exit_index)
    exits = [None] * k
    for s, j in exit_index.items():
        exits[j] = s
    if exact:
        amat = [[Fraction(0)] * m for _ in range(m)]
        bmat = [[Fraction(0)] * k for _ in range(m)]
        for i, (r, e) in enumerate(zip(rows, rhs)):
            amat[i][i] += 1
            for j, v in r.items():
                amat[i][j] -= v
            for j, v in e.items():
                bmat[i][j] += v
        h = _frac_solve(amat, bmat)
    elif m >= _SPARSE_FROM:
        import scipy.sparse as sp
        import scipy.sparse.linalg as spl

        ii, jj, vv = [], [], []
        for i, r in enumerate(rows):
            ii.append(i), jj.append(i), vv.append(1.0)
            for j, v in r.items():
                ii.append(i), jj.append(j), vv.append(-float(v))
        amat = sp.csc_matrix((vv, (ii, jj)), shape=(m, m))
        bmat = np.zeros((m, k))
        for i, e in enumerate(rhs):
            for j, v in e.items():
                bmat[i, j] += v
        h = spl.splu(amat).solve(bmat)
    else:
        amat = np.eye(m)
        bmat = np.zeros((m, k))
        for i, (r, e) in enumerate(zip(rows, rhs)):
            for j, v in r.items():
                amat[i, j] -= float(v)
            for j, v in e.items():
                bmat[i, j] += v
        h = np.linalg.solve(amat, bmat)
    return _Solved(n, base, index, exits, h, exact, depth)


def _truncation_bound(a: Cluster, y: int, depth: int) -> float:
    # the walk exits no higher than top+1, so touching -depth first is a gambler's ruin event
    top = a.height() + 1
    return (top - min(y, a.base)) / (top + depth)


def _start_mixture(sol: _Solved, start: Site) -> dict[int, object]:
    """Weights over unknowns equivalent to starting at ``start``."""
    if start.y >= sol.base:
        return {sol.index[start]: Fraction(1) if sol.exact else 1.0}
    v = lift_to_level(sol.n, start.x, start.y, sol.base, sol.depth, sol.exact)
    return {sol.index[Site(x, sol.base)]: v[x] for x in range(sol.n) if v[x] != 0}


def _mix(sol: _Solved, weights: dict[int, object]) -> dict[Site, object]:
    out: dict[Site, object] = {}
    for i, w in weights.items():
        row = sol.h[i]
        for j, s in enumerate(sol.exits):
            p = row[j]
            if p != 0:
                out[s] = out.get(s, 0) + w * p
    if not sol.exact:
        out = {s: float(p) for s, p in out.items() if p > 0.0}
    return out


def exact_exit_distribution(
    a: Cluster,
    start: tuple[int, int],
    depth: int = DEFAULT_DEPTH,
    exact: bool = False,
    cap: int = STATE_CAP,
) -> ExitDistribution:
    """Law of the first vacant site reached from ``start`` (which must be in ``a``)."""
    start = Site(int(start[0]), int(start[1]))
    if not a.is_occupied(start):
        raise StartVacant(f"start {tuple(start)} is not in the cluster")
    if start.y < -depth:
        raise ValueError("start below the truncation depth")
    sol = _solve_cluster(a, depth, exact, cap)
    probs = _mix(sol, _start_mixture(sol, start))
    return ExitDistribution(probs, _truncation_bound(a, start.y, depth), depth)


def uniform_start_exit(
    a: Cluster, level: int = 0, depth: int = DEFAULT_DEPTH, exact: bool = False, cap: int = STATE_CAP
) -> ExitDistribution:
    """Exit law for a walk released from a uniform point of ``level``."""
    sol = _solve_cluster(a, depth, exact, cap)
    w: dict[int, object] = {}
    inv_n = Fraction(1, a.n) if exact else 1.0 / a.n
    for x in range(a.n):
        for i, v in _start_mixture(sol, Site(x, level)).items():
            w[i] = w.get(i, 0) + inv_n * v
    return ExitDistribution(_mix(sol, w), _truncation_bound(a, level, depth), depth)


# cluster laws

def _check_cap(dist: Mapping, cap: int) -> None:
    if len(dist) > cap:
        raise TooLarge(f"{len(dist)} reachable clusters exceed cap {cap}")


def exact_cluster_distribution(
    a0: Cluster,
    t: int,
    depth: int = DEFAULT_DEPTH,
    shifted: bool = False,
    exact: bool = False,
    cap: int = CLUSTER_CAP,
    state_cap: int = STATE_CAP,
) -> dict[Cluster, object]:
    """Law of A(t) (or of the shifted chain) started from ``a0``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    one = Fraction(1) if exact else 1.0
    start = a0.downshift() if shifted else a0
    dist: dict[Cluster, object] = {start: one}
    cache: dict[Cluster, ExitDistribution] = {}
    for _ in range(t):
        nxt: dict[Cluster, object] = {}
        for c, p in dist.items():
            ex = cache.get(c)
            if ex is None:
                ex = cache[c] = uniform_start_exit(c, 0, depth, exact, state_cap)
            for s, q in ex.items():
                c2 = c.occupy(s)
                if shifted:
                    c2 = c2.downshift()
                nxt[c2] = nxt.get(c2, 0) + p * q
        _check_cap(nxt, cap)
        dist = nxt
    return dist


def exact_smash_distribution(
    a: Cluster,
    points: Iterable[tuple[int, int]],
    depth: int = DEFAULT_DEPTH,
    exact: bool = False,
    cap: int = CLUSTER_CAP,
    state_cap: int = STATE_CAP,
) -> dict[Cluster, object]:
    """Law of ``a ⊕ z_1 ⊕ ... ⊕ z_k`` folded left in the given order."""
    one = Fraction(1) if exact else 1.0
    dist: dict[Cluster, object] = {a: one}
    for z in points:
        z = Site(int(z[0]), int(z[1]))
        nxt: dict[Cluster, object] = {}
        for c, p in dist.items():
            if not c.is_occupied(z):
                c2 = c.occupy(z, allow_gap=True)
                nxt[c2] = nxt.get(c2, 0) + p
                continue
            for s, q in exact_exit_distribution(c, z, depth, exact, state_cap).items():
                c2 = c.occupy(s, allow_gap=True)
                nxt[c2] = nxt.get(c2, 0) + p * q
        _check_cap(nxt, cap)
        dist = nxt
    return dist


def total_variation(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(float(p.get(k, 0)) - float(q.get(k, 0))) for k in keys)
