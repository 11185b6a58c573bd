"""numba kernels operating on the mutable grid representation.

A grid is three arrays:

* ``occ``  uint8[cap, n]   occupancy of level ``lo + r`` in row ``r``
* ``cnt``  int64[cap]      number of occupied sites of each stored row
* ``meta`` int64[4]        ``[lo, base, top, cumulative_shift]``

Every level ``<= base`` is full, every level ``> top`` is empty, and rows for
levels ``base+1 .. top`` live at ``occ[level - lo]`` with ``lo <= base + 1``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .rng import child_key, next_below, next_dir, next_double, next_u64, reset_stream

LO = 0
BASE = 1
TOP = 2
SHIFT = 3
NO_FLOOR = -(1 << 62)


def _chunk_tables():
    v = np.arange(1 << 16)
    dx = np.zeros(1 << 16, dtype=np.int64)
    dy = np.zeros(1 << 16, dtype=np.int64)
    for i in range(8):
        d = (v >> (2 * i)) & 3
        dx += (d == 0).astype(np.int64) - (d == 1)
        dy += (d == 2).astype(np.int64) - (d == 3)
    return dx, dy


# net displacement of 8 consecutive direction draws packed in 16 bits
_DX8, _DY8 = _chunk_tables()


@njit(cache=True, nogil=True)
def is_occ(occ, meta, x, y):
    if y <= meta[BASE]:
        return True
    if y > meta[TOP]:
        return False
    return occ[y - meta[LO], x] != 0


@njit(cache=True, nogil=True)
def has_room(occ, cnt, meta):
    """Make sure one more row fits above ``top``; compacts if needed."""
    cap = occ.shape[0]
    if meta[TOP] - meta[LO] + 2 < cap:
        return True
    lo = meta[LO]
    newlo = meta[BASE] + 1
    k = newlo - lo
    if k <= 0:
        return False
    nrows = meta[TOP] - meta[BASE]
    for r in range(nrows):
        occ[r, :] = occ[r + k, :]
        cnt[r] = cnt[r + k]
    for r in range(nrows, cap):
        occ[r, :] = 0
        cnt[r] = 0
    meta[LO] = newlo
    return meta[TOP] - meta[LO] + 2 < cap


@njit(cache=True, nogil=True)
def occupy(occ, cnt, meta, n, x, y):
    r = y - meta[LO]
    occ[r, x] = 1
    cnt[r] += 1
    if y > meta[TOP]:
        meta[TOP] = y
    while meta[BASE] < meta[TOP] and cnt[meta[BASE] + 1 - meta[LO]] == n:
        meta[BASE] += 1


@njit(cache=True, nogil=True)
def downshift(meta):
    k = meta[BASE]
    meta[LO] -= k
    meta[TOP] -= k
    meta[BASE] = 0
    meta[SHIFT] += k
    return k


@njit(cache=True, nogil=True)
def sample_cdf(cdf, u):
    lo = 0
    hi = cdf.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, nogil=True)
def hit_offset(lam, costab, n, d, st):
    """Horizontal displacement on first reaching ``d`` levels up through full rows."""
    if d <= 0:
        return 0
    if d * math.log(lam[1]) < -40.0:
        return next_below(st, n)
    cdf = np.empty(n)
    acc = 0.0
    for j in range(n):
        s = 0.0
        for k in range(n):
            s += lam[k] ** d * costab[k, j]
        v = s / n
        if v < 0.0:
            v = 0.0
        acc += v
        cdf[j] = acc
    u = next_double(st) * acc
    return sample_cdf(cdf, u)


@njit(cache=True, nogil=True)
def walk_settle(occ, meta, n, lam, costab, retcdf, st, x, y, contract, floor):
    """Walk from an occupied site until the first vacant site; returns (x, y, steps).

    Without contraction a down-step attempted at level ``floor`` is rejected
    (the walker stays put); pass NO_FLOOR for the untruncated walk.
    """
    steps = 0
    if contract and y < meta[BASE]:
        x = (x + hit_offset(lam, costab, n, meta[BASE] - y, st)) % n
        y = meta[BASE]
        steps += 1
    base = meta[BASE]
    while True:
        # deep inside the filled region a block of steps cannot reach a vacancy:
        # apply its net displacement (same bits, same order as single steps)
        if y <= base - 32 and y - 32 >= floor and st[3] == np.uint64(0):
            w = next_u64(st)
            m16 = np.uint64(0xFFFF)
            v0 = int(w & m16)
            v1 = int((w >> np.uint64(16)) & m16)
            v2 = int((w >> np.uint64(32)) & m16)
            v3 = int(w >> np.uint64(48))
            x = (x + _DX8[v0] + _DX8[v1] + _DX8[v2] + _DX8[v3]) % n
            y += _DY8[v0] + _DY8[v1] + _DY8[v2] + _DY8[v3]
            steps += 32
            continue
        if y <= base - 8 and y - 8 >= floor and st[3] >= np.uint64(8):
            v = int(st[2] & np.uint64(0xFFFF))
            st[2] = st[2] >> np.uint64(16)
            st[3] -= np.uint64(8)
            x = (x + _DX8[v]) % n
            y += _DY8[v]
            steps += 8
            continue
        d = next_dir(st)
        steps += 1
        if d == 0:
            x += 1
            if x == n:
                x = 0
        elif d == 1:
            x -= 1
            if x < 0:
                x = n - 1
        elif d == 2:
            y += 1
        else:
            if contract and y == meta[BASE]:
                x = (x + sample_cdf(retcdf, next_double(st))) % n
                continue
            if y == floor:
                continue
            y -= 1
        if y > meta[BASE] and not is_occ(occ, meta, x, y):
            return x, y, steps


@njit(cache=True, nogil=True)
def walk_to_level(occ, meta, n, lam, costab, retcdf, st, x, y, ytarget):
    """Contracted walk from an occupied site until reaching ``ytarget`` (> y) or exiting.

    Returns (x, y, settled).
    """
    base = meta[BASE]
    if y < base:
        hop = min(base, ytarget)
        x = (x + hit_offset(lam, costab, n, hop - y, st)) % n
        y = hop
        if y == ytarget:
            return x, y, False
    while True:
        d = next_dir(st)
        if d == 0:
            x += 1
            if x == n:
                x = 0
        elif d == 1:
            x -= 1
            if x < 0:
                x = n - 1
        elif d == 2:
            y += 1
        else:
            if y == meta[BASE]:
                x = (x + sample_cdf(retcdf, next_double(st))) % n
                continue
            y -= 1
        if y > meta[BASE] and not is_occ(occ, meta, x, y):
            return x, y, True
        if y == ytarget:
            return x, y, False


@njit(cache=True, nogil=True)
def run_particles(occ, cnt, meta, n, lam, costab, retcdf, fkey, t0, count, shifted, sites, st):
    """Release particles ``t0 .. t0+count-1`` from uniform points of level 0.

    Stops early (returning the number released) when the grid is out of room.
    Settle sites are written to ``sites`` when it has ``count`` rows.
    """
    record = sites.shape[0] >= count
    for i in range(count):
        if not has_room(occ, cnt, meta):
            return i
        reset_stream(st, child_key(fkey, t0 + i))
        x = next_below(st, n)
        y = 0
        if y < meta[BASE]:
            y = meta[BASE]
        x, y, _ = walk_settle(occ, meta, n, lam, costab, retcdf, st, x, y, True, NO_FLOOR)
        occupy(occ, cnt, meta, n, x, y)
        if record:
            sites[i, 0] = x
            sites[i, 1] = y
        if shifted and meta[BASE] > 0:
            downshift(meta)
    return count


@njit(cache=True, nogil=True)
def _step_x(x, s, n):
    x += s
    if x == n:
        return 0
    if x < 0:
        return n - 1
    return x


@njit(cache=True, nogil=True)
def coupled_pair(occ1, meta1, occ2, meta2, n, lam, costab, retcdf, st, x1, y1, x2, y2):
    """Release two coupled walkers into two clusters.

    Returns (x1, y1, x2, y2, met, pre_meeting_steps).
    """
    met = False
    steps = 0
    # vertical sync: the lower walker moves alone
    if y1 < y2:
        x1, y1, settled = walk_to_level(occ1, meta1, n, lam, costab, retcdf, st, x1, y1, y2)
        if settled:
            x2, y2, _ = walk_settle(occ2, meta2, n, lam, costab, retcdf, st, x2, y2, True, NO_FLOOR)
            return x1, y1, x2, y2, False, steps
    elif y2 < y1:
        x2, y2, settled = walk_to_level(occ2, meta2, n, lam, costab, retcdf, st, x2, y2, y1)
        if settled:
            x1, y1, _ = walk_settle(occ1, meta1, n, lam, costab, retcdf, st, x1, y1, True, NO_FLOOR)
            return x1, y1, x2, y2, False, steps
    parity_pending = (n % 2 == 0) and ((x1 - x2) % 2 != 0)
    met = x1 == x2
    # reflection coupling until meeting
    while not met:
        d = next_dir(st)
        steps += 1
        if d == 2:
            y1 += 1
            y2 += 1
        elif d == 3:
            y1 -= 1
            y2 -= 1
        else:
            s = 1 if d == 0 else -1
            x1 = _step_x(x1, s, n)
            if parity_pending:
                parity_pending = False
            else:
                x2 = _step_x(x2, -s, n)
        met = x1 == x2
        v1 = not is_occ(occ1, meta1, x1, y1)
        v2 = not is_occ(occ2, meta2, x2, y2)
        if v1 and v2:
            return x1, y1, x2, y2, met, steps
        if v1:
            x2, y2, _ = walk_settle(occ2, meta2, n, lam, costab, retcdf, st, x2, y2, True, NO_FLOOR)
            return x1, y1, x2, y2, met, steps
        if v2:
            x1, y1, _ = walk_settle(occ1, meta1, n, lam, costab, retcdf, st, x1, y1, True, NO_FLOOR)
            return x1, y1, x2, y2, met, steps
    # coalesced: one path, contracted below the level filled in both clusters
    x = x1
    y = y1
    while True:
        bmin = min(meta1[BASE], meta2[BASE])
        if y < bmin:
            x = (x + hit_offset(lam, costab, n, bmin - y, st)) % n
            y = bmin
        d = next_dir(st)
        if d == 0:
            x = _step_x(x, 1, n)
        elif d == 1:
            x = _step_x(x, -1, n)
        elif d == 2:
            y += 1
        else:
            if y == bmin:
                x = (x + sample_cdf(retcdf, next_double(st))) % n
                continue
            y -= 1
        v1 = not is_occ(occ1, meta1, x, y)
        v2 = not is_occ(occ2, meta2, x, y)
        if v1 and v2:
            return x, y, x, y, True, steps
        if v1:
            x2, y2, _ = walk_settle(occ2, meta2, n, lam, costab, retcdf, st, x, y, True, NO_FLOOR)
            return x, y, x2, y2, True, steps
        if v2:
            x1, y1, _ = walk_settle(occ1, meta1, n, lam, costab, retcdf, st, x, y, True, NO_FLOOR)
            return x1, y1, x, y, True, steps


@njit(cache=True, nogil=True)
def release_pairs(occ1, cnt1, meta1, occ2, cnt2, meta2, n, lam, costab, retcdf, fkey, sites1, sites2, out, st):
    """Release frozen pairs in order; ``out[i] = [x1, y1, x2, y2, met]``.

    A frozen site that is vacant in its cluster is simply added (no walk).
    Returns the number of pairs released (fewer only if a grid ran out of room).
    """
    for i in range(sites1.shape[0]):
        if not has_room(occ1, cnt1, meta1) or not has_room(occ2, cnt2, meta2):
            return i
        reset_stream(st, child_key(fkey, i))
        a1 = sites1[i, 0]
        b1 = sites1[i, 1]
        a2 = sites2[i, 0]
        b2 = sites2[i, 1]
        in1 = is_occ(occ1, meta1, a1, b1)
        in2 = is_occ(occ2, meta2, a2, b2)
        met = False
        if in1 and in2:
            a1, b1, a2, b2, met, _ = coupled_pair(
                occ1, meta1, occ2, meta2, n, lam, costab, retcdf, st, a1, b1, a2, b2
            )
        elif in1:
            a1, b1, _ = walk_settle(occ1, meta1, n, lam, costab, retcdf, st, a1, b1, True, NO_FLOOR)
        elif in2:
            a2, b2, _ = walk_settle(occ2, meta2, n, lam, costab, retcdf, st, a2, b2, True, NO_FLOOR)
        occupy(occ1, cnt1, meta1, n, a1, b1)
        occupy(occ2, cnt2, meta2, n, a2, b2)
        out[i, 0] = a1
        out[i, 1] = b1
        out[i, 2] = a2
        out[i, 3] = b2
        out[i, 4] = 1 if met else 0
    return sites1.shape[0]


@njit(cache=True, nogil=True)
def sample_settles(occ, meta, n, lam, costab, retcdf, fkey, x0, y0, uniform_start, contract, floor, count, out):
    """Independent settle sites from one start (or uniform on level ``y0``)."""
    st = np.zeros(4, dtype=np.uint64)
    for i in range(count):
        reset_stream(st, child_key(fkey, i))
        x = next_below(st, n) if uniform_start else x0
        a, b, _ = walk_settle(occ, meta, n, lam, costab, retcdf, st, x, y0, contract, floor)
        out[i, 0] = a
        out[i, 1] = b


@njit(cache=True, nogil=True)
def sample_directions(st, count, out):
    for i in range(count):
        out[i] = next_dir(st)


@njit(cache=True, nogil=True)
def horizontal_gaps(st, count, out):
    """Steps up to and including each vertical move of a free walk."""
    for i in range(count):
        g = 1
        while next_dir(st) < 2:
            g += 1
        out[i] = g
