"""Polyline predicates: winding, containment, distances, simplicity."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puzzlekit.polygons import (
    bbox_diameter,
    contains_point,
    directed_hausdorff,
    ensure_closed,
    is_simple_closed,
    min_boundary_distance,
    points_in_polygon,
    winding_number,
)


def circle(n=64, r=1.0, center=0j):
    th = np.linspace(0.0, 2.0 * np.pi, n + 1)
    return center + r * np.exp(1j * th)


class TestWinding:
    def test_inside_is_one_turn(self):
        assert abs(winding_number(circle(), 0.1 + 0.2j) - 1.0) < 1e-9

    def test_outside_is_zero(self):
        assert abs(winding_number(circle(), 2.0 + 0j)) < 1e-9

    def test_orientation_flips_sign(self):
        assert abs(winding_number(circle()[::-1], 0j) + 1.0) < 1e-9

    def test_contains_point(self):
        assert contains_point(circle(), 0.3j)
        assert not contains_point(circle(), 1.7)

    def test_on_vertex_does_not_warn(self):
        poly = circle(16)
        with np.errstate(all="raise"):
            winding_number(poly, complex(poly[3]))


class TestEnsureClosed:
    def test_appends_first_vertex(self):
        open_tri = np.array([0, 1, 1j], dtype=complex)
        closed = ensure_closed(open_tri)
        assert len(closed) == 4 and closed[0] == closed[-1]

    def test_closed_input_unchanged(self):
        tri = np.array([0, 1, 1j, 0], dtype=complex)
        assert len(ensure_closed(tri)) == 4

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            ensure_closed(np.array([0, 1], dtype=complex))


class TestPointsInPolygon:
    def test_matches_winding_on_grid(self):
        poly = circle(48, r=1.3, center=0.2 - 0.1j)
        xs = np.linspace(-2, 2, 23)
        pts = (xs[:, None] + 1j * xs[None, :]).ravel()
        fast = points_in_polygon(poly, pts)
        slow = np.array([contains_point(poly, z) for z in pts])
        # skip points hugging the curve where the two conventions may differ
        far = min_boundary_distance(poly, pts) > 1e-9
        assert np.array_equal(fast[far], slow[far])

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_random_probes(self, x, y):
        poly = circle(96)
        z = complex(x, y)
        if abs(abs(z) - 1.0) < 1e-2:
            return  # too close to the circle for a 96-gon to resolve
        assert points_in_polygon(poly, [z])[0] == (abs(z) < 1.0)


class TestDistances:
    def test_circle_distance(self):
        poly = circle(512)
        pts = np.array([0j, 0.5, 2.0 + 0j, 3j])
        d = min_boundary_distance(poly, pts)
        exact = np.abs(np.abs(pts) - 1.0)
        assert np.max(np.abs(d - exact)) < 1e-3  # chord sag of the 512-gon

    def test_directed_hausdorff_concentric(self):
        a, b = circle(256, r=2.0), circle(256, r=1.0)
        assert abs(directed_hausdorff(a, b) - 1.0) < 1e-3
        assert abs(directed_hausdorff(b, a) - 1.0) < 1e-3

    def test_hausdorff_of_subset_is_zero(self):
        poly = circle(64)
        assert directed_hausdorff(poly[:20], poly) < 1e-12

    def test_bbox_diameter(self):
        sq = np.array([0, 1, 1 + 1j, 1j, 0], dtype=complex)
        assert abs(bbox_diameter(sq) - np.sqrt(2.0)) < 1e-12


class TestSimpleClosed:
    def test_circle_is_simple(self):
        assert is_simple_closed(circle(128))

    def test_bowtie_is_not(self):
        bow = np.array([0, 1 + 1j, 1, 0 + 1j, 0], dtype=complex)
        assert not is_simple_closed(bow)

    def test_square_is_simple(self):
        sq = np.array([0, 1, 1 + 1j, 1j, 0], dtype=complex)
        assert is_simple_closed(sq)
