import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from massfit.geometry import (
    HeightField,
    Polygon2,
    TriMesh,
    chain_segments,
    height_field_query,
    heights_at,
    merge_collinear,
    point_segment_distance,
    segment_distance,
    signed_area,
    slice_mesh_horizontal,
    slice_mesh_vertical,
    slice_segments_horizontal,
    triangulate_polygon,
)
from oracles import brute_slice_horizontal, cube, gable_prism, ray_cast_height


@pytest.fixture
def unit_cube():
    return TriMesh(*cube())


def _total_length(segs):
    return sum(s.length for s in segs)


def _endpoint_degrees(segs, tol=1e-6):
    pts = [p for s in segs for p in (np.array(s.a), np.array(s.b))]
    return [sum(np.linalg.norm(p - q) < tol for q in pts) for p in pts]


class TestLoading:
    def test_welds_duplicate_vertices(self):
        V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1e-8, 0, 0], [1, 1, 0]], float)
        m = TriMesh.from_arrays(V, np.array([[0, 1, 2], [3, 4, 2]]))
        assert len(m.vertices) == 4

    def test_drops_degenerate_triangles(self):
        V = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]], float)
        m = TriMesh.from_arrays(V, np.array([[0, 1, 2], [0, 1, 3], [0, 0, 3]]))
        assert len(m.triangles) == 1

    def test_rejects_bad_indices(self):
        with pytest.raises(ValueError):
            TriMesh(np.zeros((3, 3)), np.array([[0, 1, 5]]))


class TestHorizontalSlice:
    def test_cube_mid_height(self, unit_cube):
        segs = slice_mesh_horizontal(unit_cube, 0.5)
        assert _total_length(segs) == pytest.approx(4.0, abs=1e-6)
        V, T = cube()
        oracle = brute_slice_horizontal(V, T, 0.5)
        assert _total_length(segs) == pytest.approx(sum(np.linalg.norm(b - a) for a, b in oracle), abs=1e-9)

    def test_above_mesh_is_empty(self, unit_cube):
        assert slice_mesh_horizontal(unit_cube, 1.5) == []

    def test_single_triangle(self):
        m = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 0, 1]], float), np.array([[0, 1, 2]]))
        segs = slice_mesh_horizontal(m, 0.5)
        assert len(segs) == 1
        ends = sorted([tuple(np.round(segs[0].a, 12)), tuple(np.round(segs[0].b, 12))])
        assert ends == [(0.0, 0.0), (0.5, 0.0)]
        assert segs[0].length == pytest.approx(0.5)

    @pytest.mark.parametrize("z", [0.13, 0.37, 0.77, 0.999])
    def test_closed_mesh_gives_closed_loops(self, z):
        V, T = gable_prism()
        segs = slice_mesh_horizontal(TriMesh(V, T), z * 2)
        assert segs
        assert all(d == 2 for d in _endpoint_degrees(segs))
        loops = chain_segments(slice_segments_horizontal(TriMesh(V, T), z * 2))
        assert len(loops) == 1

    def test_length_continuous_away_from_flat_faces(self, unit_cube):
        rng = np.random.default_rng(3)
        for z in rng.uniform(0.01, 0.99, 10):
            a = _total_length(slice_mesh_horizontal(unit_cube, z))
            b = _total_length(slice_mesh_horizontal(unit_cube, z + 1e-7))
            assert abs(a - b) < 1e-6

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 1.99))
    def test_matches_brute_force_on_prism(self, z):
        assume(abs(z - 1.0) > 1e-9)
        V, T = gable_prism()
        ours = _total_length(slice_mesh_horizontal(TriMesh(V, T), z))
        ref = sum(np.linalg.norm(b - a) for a, b in brute_slice_horizontal(V, T, z))
        assert ours == pytest.approx(ref, abs=1e-9)


    def test_plane_through_vertices(self):
        # walls topped exactly at the slice height still close the loop
        V, T = gable_prism(width=2, length=4, eaves=1, ridge=2)
        segs = slice_mesh_horizontal(TriMesh(V, T), 1.0)
        assert _total_length(segs) == pytest.approx(12.0)
        assert all(d == 2 for d in _endpoint_degrees(segs))


class TestVerticalSlice:
    def test_cube_square_outline(self, unit_cube):
        segs = slice_mesh_vertical(unit_cube, (0.5, 0.0), (0.0, 1.0))
        pts = {tuple(np.round(p, 9)) for s in segs for p in s}
        # diagonals split the sides, but every point lies on the outline
        assert {(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)} <= pts
        assert all(min(x, 1 - x, y, 1 - y) == 0 for x, y in pts)
        total = sum(math.dist(*s) for s in segs)
        assert total == pytest.approx(4.0)

    def test_miss_is_empty(self, unit_cube):
        assert slice_mesh_vertical(unit_cube, (5.0, 0.0), (0.0, 1.0)) == []

    def test_gable_cross_section(self):
        V, T = gable_prism(width=2, eaves=1, ridge=2)
        segs = slice_mesh_vertical(TriMesh(V, T), (0.0, 2.0), (1.0, 0.0))
        pts = np.array([p for s in segs for p in s])
        top = pts[np.argmax(pts[:, 1])]
        assert top == pytest.approx([1.0, 2.0])
        assert np.any(np.isclose(pts[:, 1], 1.0))


class TestHeightField:
    def test_cube_top(self, unit_cube):
        assert height_field_query(unit_cube, (0.5, 0.5)) == pytest.approx(1.0)

    def test_outside_is_absent(self, unit_cube):
        assert height_field_query(unit_cube, (3.0, 3.0)) is None

    def test_slanted_triangle(self):
        m = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 1]], float), np.array([[0, 1, 2]]))
        assert height_field_query(m, (0.25, 0.5)) == pytest.approx(0.5)

    def test_agrees_with_ray_cast(self):
        V, T = gable_prism(width=3, length=5, eaves=1.5, ridge=3)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.5, 5.5, (1000, 2))
        hf = HeightField(TriMesh(V, T))
        got = hf.query(pts)
        for p, h in zip(pts, got):
            ref = ray_cast_height(V, T, p)
            if ref is None:
                assert np.isnan(h)
            else:
                assert h == pytest.approx(ref, abs=1e-9)
        np.testing.assert_array_equal(heights_at(TriMesh(V, T), pts), got)


class TestPolygons:
    def test_signed_area(self):
        assert signed_area(np.array([(0, 0), (2, 0), (2, 1), (0, 1)], float)) == pytest.approx(2.0)

    def test_orientation_normalised(self):
        p = Polygon2(np.array([(0, 0), (0, 1), (1, 1), (1, 0)], float))
        assert signed_area(p.outer) > 0
        assert p.area == pytest.approx(1.0)

    def test_holes_reduce_area(self):
        p = Polygon2(np.array([(0, 0), (4, 0), (4, 4), (0, 4)], float), (np.array([(1, 1), (3, 1), (3, 3), (1, 3)], float),))
        assert p.area == pytest.approx(12.0)
        assert p.shape.area == pytest.approx(12.0)

    def test_merge_collinear(self):
        ring = np.array([(0, 0), (1, 0), (2, 0), (2, 1), (0, 1)], float)
        assert len(merge_collinear(ring)) == 4

    @pytest.mark.parametrize("holes", [(), ((1, 1), (2, 1), (2, 2), (1, 2))])
    def test_triangulation_covers_area(self, holes):
        outer = np.array([(0, 0), (4, 0), (4, 3), (0, 3)], float)
        hs = [np.array(holes, float)] if holes else []
        pts, tris = triangulate_polygon(outer, hs)
        area = sum(abs(signed_area(pts[list(t)])) for t in tris)
        assert area == pytest.approx(12.0 - (1.0 if holes else 0.0))

    def test_distances(self):
        assert point_segment_distance((0, 1), (-1, 0), (1, 0)) == pytest.approx(1.0)
        assert point_segment_distance((3, 0), (-1, 0), (1, 0)) == pytest.approx(2.0)
        assert segment_distance((0, 0), (1, 0), (0, 2), (1, 3)) == pytest.approx(2.0)
        assert segment_distance((0, 0), (2, 2), (0, 2), (2, 0)) == 0.0
