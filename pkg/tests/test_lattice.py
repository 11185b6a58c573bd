from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idla import Cluster, Grid, InvalidWidth, OccupiedSite, Site
from idla.lattice import check_width

from conftest import clusters


def test_width_checks():
    assert check_width(3) == 3
    for bad in (2, 0, -4):
        with pytest.raises(InvalidWidth):
            check_width(bad)
    with pytest.raises(InvalidWidth):
        Cluster(2)


class TestMembership:
    def test_below_base(self):
        assert Cluster.flat(4).is_occupied((2, -5))

    def test_above_rows(self):
        assert not Cluster.flat(4).is_occupied((0, 1))

    def test_explicit_bit(self):
        a = Cluster.from_sites(4, [(1, 1)])
        assert (1, 1) in a
        assert (0, 1) not in a

    def test_x_out_of_range(self):
        with pytest.raises(ValueError):
            Cluster.flat(4).is_occupied((4, 0))


class TestOccupy:
    def test_first_site(self):
        a = Cluster.flat(4).occupy((0, 1))
        assert a.base == 0 and a.rows == (0b0001,)

    def test_full_row_absorbed(self):
        a = Cluster.from_sites(4, [(0, 1), (1, 1), (2, 1)])
        b = a.occupy((3, 1))
        assert b.base == 1 and b.rows == ()
        assert b == Cluster.flat(4, 1)

    def test_twice_raises(self):
        a = Cluster.flat(4).occupy((0, 1))
        with pytest.raises(OccupiedSite):
            a.occupy((0, 1))

    def test_gap_refused_unless_allowed(self):
        with pytest.raises(ValueError):
            Cluster.flat(4).occupy((0, 3))
        a = Cluster.flat(4).occupy((0, 3), allow_gap=True)
        assert a.rows == (0, 0, 1)


class TestFunctionals:
    def test_height(self):
        assert Cluster.flat(5).height() == 0
        assert Cluster.from_sites(6, [(0, 1), (5, 2), (5, 3)]).height() == 3
        assert Cluster.flat(5, 2).height() == 2

    def test_cardinality(self):
        assert Cluster.flat(4).cardinality_above(0) == 0
        assert Cluster.flat(4, 3).cardinality_above(0) == 12
        assert Cluster.from_sites(4, [(0, 1), (1, 1)]).cardinality_above(0) == 2
        assert len(Cluster.from_sites(4, [(0, 1), (1, 1)])) == 2

    def test_excess_height(self):
        for k in range(4):
            assert Cluster.flat(4, k).excess_height() == 0
        assert Cluster.from_sites(4, [(0, 1)]).excess_height() == Fraction(3, 4)
        assert Cluster.from_sites(4, [(0, 1), (0, 2), (0, 3)]).excess_height() == Fraction(9, 4)

    def test_max_filled_level(self):
        assert Cluster.flat(4).max_filled_level() == 0
        assert Cluster.from_sites(4, [(0, 2)], base=1).max_filled_level() == 1
        assert Cluster.from_sites(4, [(0, 1), (1, 1), (3, 1)]).max_filled_level() == 0

    def test_downshift(self):
        a = Cluster.from_sites(4, [(1, 3)], base=2)
        assert a.downshift() == Cluster.from_sites(4, [(1, 1)])
        b = Cluster.from_sites(4, [(0, 1)])
        assert b.downshift() == b


@given(clusters())
def test_canonical_form(a):
    if a.rows:
        assert a.rows[0] != (1 << a.n) - 1
        assert a.rows[-1] != 0


@given(clusters())
def test_downshift_idempotent(a):
    assert a.downshift().downshift() == a.downshift()
    assert a.downshift().max_filled_level() == 0


@given(clusters())
def test_excess_height_nonnegative(a):
    assert a.excess_height(a.base) >= 0


@given(clusters(), st.integers(-5, 5))
def test_shift_preserves_shape(a, k):
    b = a.shifted(k)
    assert b.rows == a.rows and b.base == a.base + k
    assert b.excess_height(a.base + k) == a.excess_height(a.base)


@given(clusters())
def test_text_roundtrip(a):
    assert Cluster.from_text(a.to_text()) == a


def test_text_rejects_non_canonical():
    with pytest.raises(ValueError):
        Cluster.from_text("IDLA v1 N=3 base=0 rows=1\n111\n")
    with pytest.raises(ValueError):
        Cluster.from_text("IDLA v2 N=3 base=0 rows=0\n")
    with pytest.raises(ValueError):
        Cluster.from_text("IDLA v1 N=3 base=0 rows=2\n100\n")


@given(clusters(), st.data())
def test_occupy_adds_exactly_one_site(a, data):
    boundary = a.vacant_boundary()
    s = data.draw(st.sampled_from(boundary))
    b = a.occupy(s)
    assert b.cardinality_above(a.base) == a.cardinality_above(a.base) + 1
    assert a.issubset(b) and not b.issubset(a)
    assert s in b


@given(clusters())
def test_vacant_boundary_is_vacant_and_adjacent(a):
    for x, y in a.vacant_boundary():
        assert not a.is_occupied((x, y))
        nbrs = [((x + 1) % a.n, y), ((x - 1) % a.n, y), (x, y + 1), (x, y - 1)]
        assert any(a.is_occupied(s) for s in nbrs)


@given(clusters(), st.integers(0, 40))
def test_grid_roundtrip(a, headroom):
    g = Grid.from_cluster(a, headroom=headroom)
    assert g.to_cluster() == a
    assert g.base == a.base and g.top == a.height()
    for y in range(a.base - 2, a.height() + 3):
        for x in range(a.n):
            assert g.is_occupied((x, y)) == a.is_occupied((x, y))


@given(clusters(max_rows=3), st.data())
def test_grid_occupy_matches_cluster(a, data):
    g = Grid.from_cluster(a, headroom=1)
    c = a
    for _ in range(data.draw(st.integers(1, 12))):
        s = data.draw(st.sampled_from(c.vacant_boundary()))
        c = c.occupy(s)
        g.occupy(s)
    assert g.to_cluster() == c


def test_grid_downshift_tracks_shift():
    g = Grid.from_cluster(Cluster.from_sites(3, [(0, 3)], base=2))
    assert g.downshift() == 2
    assert g.cumulative_shift == 2
    assert g.to_cluster() == Cluster.from_sites(3, [(0, 1)])


def test_site_is_a_tuple():
    s = Site(1, -2)
    assert s == (1, -2) and s.x == 1 and s.y == -2
    assert np.array(s).tolist() == [1, -2]
