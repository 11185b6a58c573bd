"""Cylinder geometry Z_N x Z and the cluster state space.

A :class:`Cluster` is the union of the filled half-cylinder ``{y <= base}``
and finitely many occupied sites above it, stored as one N-bit mask per level
``base+1, base+2, ...``.  Clusters are immutable, canonical values, so ``==``
and ``hash`` are set equality.

:class:`Grid` is the mutable, array-backed twin used by the simulation
kernels.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from . import _kernels as K


class IDLAError(Exception):
    """Base class for errors raised by this package."""


class InvalidWidth(IDLAError, ValueError):
    pass


class OccupiedSite(IDLAError, ValueError):
    pass


class StartVacant(IDLAError, ValueError):
    pass


class CardinalityMismatch(IDLAError, ValueError):
    pass


class Site(NamedTuple):
    x: int
    y: int


def check_width(n: int) -> int:
    if int(n) != n or n < 3:
        raise InvalidWidth(f"cylinder width must be an integer >= 3, got {n!r}")
    return int(n)


def _popcount(v: int) -> int:
    return bin(v).count("1")


class Cluster:
    """A set ``A = R_base ∪ F`` on the cylinder of width ``n``."""

    __slots__ = ("n", "base", "rows", "_full", "_hash")

    def __init__(self, n: int, base: int = 0, rows: Iterable[int] = ()):
        self.n = check_width(n)
        full = (1 << self.n) - 1
        rows = [int(r) for r in rows]
        for r in rows:
            if r < 0 or r > full:
                raise ValueError(f"row mask {r:#x} out of range for n={self.n}")
        base = int(base)
        while rows and rows[0] == full:
            rows.pop(0)
            base += 1
        while rows and rows[-1] == 0:
            rows.pop()
        self.base = base
        self.rows = tuple(rows)
        self._full = full
        self._hash = hash((self.n, self.base, self.rows))

    # construction helpers

    @classmethod
    def flat(cls, n: int, k: int = 0) -> "Cluster":
        """The filled rectangle R_k."""
        return cls(n, k)

    @classmethod
    def from_sites(cls, n: int, sites: Iterable[tuple[int, int]], base: int = 0) -> "Cluster":
        """``R_base`` plus the given sites (sites at or below ``base`` are ignored)."""
        n = check_width(n)
        masks: dict[int, int] = {}
        for x, y in sites:
            if not 0 <= x < n:
                raise ValueError(f"x={x} outside [0, {n})")
            if y > base:
                masks[y] = masks.get(y, 0) | (1 << x)
        top = max(masks, default=base)
        return cls(n, base, [masks.get(y, 0) for y in range(base + 1, top + 1)])

    # value semantics

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Cluster):
            return NotImplemented
        return self.n == other.n and self.base == other.base and self.rows == other.rows

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Cluster(n={self.n}, base={self.base}, rows={[bin(r) for r in self.rows]})"

    def __reduce__(self):
        return (Cluster, (self.n, self.base, self.rows))

    # queries

    def is_occupied(self, s: tuple[int, int]) -> bool:
        x, y = s
        if not 0 <= x < self.n:
            raise ValueError(f"x={x} outside [0, {self.n})")
        if y <= self.base:
            return True
        i = y - self.base - 1
        if i >= len(self.rows):
            return False
        return bool(self.rows[i] >> x & 1)

    __contains__ = is_occupied

    def occupy(self, s: tuple[int, int], allow_gap: bool = False) -> "Cluster":
        """``A ∪ {s}``.  Unless ``allow_gap``, ``s`` may be at most one level above the top."""
        x, y = s
        if self.is_occupied(s):
            raise OccupiedSite(f"site {(x, y)} is already occupied")
        i = y - self.base - 1
        if i > len(self.rows) and not allow_gap:
            raise ValueError(f"site {(x, y)} would leave an empty row below it")
        rows = list(self.rows)
        while len(rows) <= i:
            rows.append(0)
        rows[i] |= 1 << x
        return Cluster(self.n, self.base, rows)

    def height(self) -> int:
        return self.base + len(self.rows)

    def top(self) -> int:
        return self.height()

    def cardinality_above(self, level: int = 0) -> int:
        """Number of occupied sites with ``y > level``."""
        count = 0
        if level < self.base:
            count = (self.base - level) * self.n
        for i, r in enumerate(self.rows):
            if self.base + 1 + i > level:
                count += _popcount(r)
        return count

    def __len__(self) -> int:
        return self.cardinality_above(0)

    def excess_height(self, reference_level: int = 0) -> Fraction:
        h = self.height() - reference_level
        return Fraction(h) - Fraction(self.cardinality_above(reference_level), self.n)

    def max_filled_level(self) -> int:
        return self.base

    def downshift(self) -> "Cluster":
        """Translate down so the maximal filled rectangle is R_0."""
        if self.base == 0:
            return self
        return Cluster(self.n, 0, self.rows)

    def shifted(self, k: int) -> "Cluster":
        """Translate by ``k`` levels (up for positive ``k``)."""
        return Cluster(self.n, self.base + k, self.rows)

    def row_mask(self, y: int) -> int:
        if y <= self.base:
            return self._full
        i = y - self.base - 1
        return self.rows[i] if i < len(self.rows) else 0

    def sites_above(self, level: int = 0) -> Iterator[Site]:
        """Occupied sites with ``y > level``, by level ascending then x ascending."""
        for y in range(level + 1, self.height() + 1):
            m = self.row_mask(y)
            for x in range(self.n):
                if m >> x & 1:
                    yield Site(x, y)

    def vacant_boundary(self) -> list[Site]:
        """Vacant sites adjacent to the cluster."""
        out = []
        for y in range(self.base + 1, self.height() + 2):
            m = self.row_mask(y)
            below = self.row_mask(y - 1)
            above = self.row_mask(y + 1)
            for x in range(self.n):
                if m >> x & 1:
                    continue
                nb = (
                    below >> x & 1
                    or above >> x & 1
                    or m >> ((x + 1) % self.n) & 1
                    or m >> ((x - 1) % self.n) & 1
                )
                if nb:
                    out.append(Site(x, y))
        return out

    def issubset(self, other: "Cluster") -> bool:
        if self.n != other.n:
            return False
        for y in range(min(self.base, other.base) + 1, self.height() + 1):
            if self.row_mask(y) & ~other.row_mask(y):
                return False
        return self.base <= other.base or all(
            other.row_mask(y) == self._full for y in range(other.base + 1, self.base + 1)
        )

    # serialization

    def to_text(self) -> str:
        lines = [f"IDLA v1 N={self.n} base={self.base} rows={len(self.rows)}"]
        for r in self.rows:
            lines.append("".join("1" if r >> x & 1 else "0" for x in range(self.n)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Cluster":
        lines = text.strip("\n").split("\n")
        m = re.fullmatch(r"IDLA v1 N=(\d+) base=(-?\d+) rows=(\d+)", lines[0].strip())
        if m is None:
            raise ValueError(f"not an IDLA v1 header: {lines[0]!r}")
        n, base, nrows = int(m.group(1)), int(m.group(2)), int(m.group(3))
        body = lines[1:]
        if len(body) != nrows:
            raise ValueError(f"expected {nrows} rows, found {len(body)}")
        rows = []
        for line in body:
            if len(line) != n or set(line) - {"0", "1"}:
                raise ValueError(f"bad row {line!r}")
            rows.append(sum(1 << x for x, c in enumerate(line) if c == "1"))
        c = cls(n, base, rows)
        if c.base != base or len(c.rows) != nrows:
            raise ValueError("snapshot is not in canonical form")
        return c


class Grid:
    """Mutable array-backed cluster for the numba kernels."""

    __slots__ = ("n", "occ", "cnt", "meta")

    def __init__(self, n: int, occ: np.ndarray, cnt: np.ndarray, meta: np.ndarray):
        self.n = n
        self.occ = occ
        self.cnt = cnt
        self.meta = meta

    @classmethod
    def from_cluster(cls, c: Cluster, headroom: int = 64) -> "Grid":
        cap = len(c.rows) + max(headroom, 8)
        occ = np.zeros((cap, c.n), dtype=np.uint8)
        cnt = np.zeros(cap, dtype=np.int64)
        for i, r in enumerate(c.rows):
            for x in range(c.n):
                if r >> x & 1:
                    occ[i, x] = 1
            cnt[i] = _popcount(r)
        meta = np.array([c.base + 1, c.base, c.height(), 0], dtype=np.int64)
        return cls(c.n, occ, cnt, meta)

    def copy(self) -> "Grid":
        return Grid(self.n, self.occ.copy(), self.cnt.copy(), self.meta.copy())

    @property
    def base(self) -> int:
        return int(self.meta[K.BASE])

    @property
    def top(self) -> int:
        return int(self.meta[K.TOP])

    @property
    def cumulative_shift(self) -> int:
        return int(self.meta[K.SHIFT])

    def grow(self, min_rows: int = 0) -> None:
        """Compact and double the row capacity (at least ``min_rows`` spare rows)."""
        K.has_room(self.occ, self.cnt, self.meta)
        lo = int(self.meta[K.LO])
        used = self.top - lo + 1
        cap = max(2 * self.occ.shape[0], used + min_rows + 8)
        occ = np.zeros((cap, self.n), dtype=np.uint8)
        cnt = np.zeros(cap, dtype=np.int64)
        occ[: self.occ.shape[0]] = self.occ
        cnt[: self.cnt.shape[0]] = self.cnt
        self.occ, self.cnt = occ, cnt

    def reserve(self, extra_rows: int) -> None:
        K.has_room(self.occ, self.cnt, self.meta)
        if self.top - int(self.meta[K.LO]) + extra_rows + 2 >= self.occ.shape[0]:
            self.grow(extra_rows)

    def is_occupied(self, s: tuple[int, int]) -> bool:
        return bool(K.is_occ(self.occ, self.meta, int(s[0]), int(s[1])))

    def occupy(self, s: tuple[int, int]) -> None:
        x, y = int(s[0]), int(s[1])
        if self.is_occupied((x, y)):
            raise OccupiedSite(f"site {(x, y)} is already occupied")
        if not 0 <= x < self.n:
            raise ValueError(f"x={x} outside [0, {self.n})")
        # gaps are allowed here: smash sums may drop a site anywhere
        self.reserve(max(y - self.top, 1))
        K.occupy(self.occ, self.cnt, self.meta, self.n, x, y)

    def downshift(self) -> int:
        return int(K.downshift(self.meta))

    def to_cluster(self) -> Cluster:
        lo = int(self.meta[K.LO])
        rows = []
        for y in range(self.base + 1, self.top + 1):
            r = self.occ[y - lo]
            rows.append(int(sum(1 << int(x) for x in np.flatnonzero(r))))
        return Cluster(self.n, self.base, rows)

    def row_counts(self) -> np.ndarray:
        lo = int(self.meta[K.LO])
        return self.cnt[self.base + 1 - lo : self.top + 1 - lo].copy()

    def partial_rows(self) -> tuple[int, np.ndarray]:
        """(first level, occupancy rows) for levels ``base+1 .. top``."""
        lo = int(self.meta[K.LO])
        return self.base + 1, self.occ[self.base + 1 - lo : self.top + 1 - lo].copy()
