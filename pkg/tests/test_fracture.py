import numpy as np
import pytest
from shapely.geometry import LineString
from shapely.ops import unary_union

from massfit.fracture import OUTSIDE, classify_polygons, compute_height_diffs, fracture_plane, working_bbox
from massfit.geometry import Polygon2, Segment2, TriMesh
from massfit.sweep import SweepEdge
from oracles import random_arrangement

BBOX = Polygon2.box(-10, -10, 20, 16)


def sweep(a, b, i=0, area=20.0):
    return SweepEdge(Segment2(tuple(map(float, a)), tuple(map(float, b))), area, i)


def rect_sweeps():
    corners = [(0, 0), (10, 0), (10, 6), (0, 6)]
    return [sweep(corners[k], corners[(k + 1) % 4], k) for k in range(4)]


def box_mesh(x0, y0, x1, y1, h):
    V = np.array([[x0, y0, h], [x1, y0, h], [x1, y1, h], [x0, y1, h]], float)
    return TriMesh(V, np.array([[0, 1, 2], [0, 2, 3]]))


class TestFracture:
    def test_two_crossing_lines(self):
        arr = fracture_plane([sweep((0, 3), (10, 3), 0), sweep((5, 0), (5, 6), 1)], BBOX)
        assert len(arr.polygons) == 4

    def test_one_line(self):
        arr = fracture_plane([sweep((0, 3), (10, 3))], BBOX)
        assert len(arr.polygons) == 2
        shared = [e for e in arr.edges if e.left != OUTSIDE and e.right != OUTSIDE]
        assert shared and all(e.is_sweep for e in shared)

    def test_rectangle_gives_grid(self):
        arr = fracture_plane(rect_sweeps(), BBOX)
        assert len(arr.polygons) == 9

    def test_continuations_flag(self):
        arr = fracture_plane([sweep((0, 3), (4, 3))], BBOX, continuations_count_as_sweep=False)
        inner = [e for e in arr.edges if e.left != OUTSIDE and e.right != OUTSIDE]
        assert {e.is_sweep for e in inner} == {True, False}
        on_sweep = sum(e.length for e in inner if e.is_sweep)
        assert on_sweep == pytest.approx(4.0)

    def test_area_conservation(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            arr = random_arrangement(rng, max_polygons=40)
            total = sum(p.area for p in arr.polygons.values())
            assert total == pytest.approx(arr.bbox.area, rel=1e-6)
            # and the pieces really tile the box
            assert unary_union([p.shape for p in arr.polygons.values()]).area == pytest.approx(arr.bbox.area, rel=1e-6)

    def test_deterministic(self):
        sw = rect_sweeps() + [sweep((3, -2), (7, 8), 4)]
        a, b = fracture_plane(sw, BBOX), fracture_plane(sw, BBOX)
        assert sorted(a.polygons) == sorted(b.polygons)
        for k in a.polygons:
            np.testing.assert_array_equal(a.polygons[k].outer, b.polygons[k].outer)
        np.testing.assert_array_equal(a.vertices, b.vertices)

    def test_sweeps_covered_by_their_fragments(self):
        sw = rect_sweeps() + [sweep((3, -2), (7, 8), 4), sweep((1, 1), (2, 5), 5)]
        arr = fracture_plane(sw, BBOX)
        for i, s in enumerate(sw):
            pieces = [LineString([e.segment.a, e.segment.b]) for e in arr.edges if e.sweep_origin == i]
            covered = unary_union(pieces).intersection(LineString([s.segment.a, s.segment.b]).buffer(1e-9)).length
            assert covered == pytest.approx(s.length, abs=1e-6)

    def test_no_micro_edges(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            arr = random_arrangement(rng, max_polygons=40)
            assert min(e.length for e in arr.edges) > 1e-6

    def test_near_duplicate_lines_merge(self):
        arr = fracture_plane([sweep((0, 3), (10, 3), 0), sweep((0, 3.01), (9, 3.02), 1)], BBOX)
        assert len(arr.polygons) == 2

    def test_working_bbox_margin(self):
        bb = working_bbox([Polygon2.box(0, 0, 10, 6)], None, 5.0)
        assert bb.shape.bounds == pytest.approx((-5, -5, 15, 11))


class TestClassify:
    def test_gis_center_cell(self):
        arr = classify_polygons(fracture_plane(rect_sweeps(), BBOX), [Polygon2.box(0, 0, 10, 6)], None, h_min=1e9)
        kept = [arr.polygons[k] for k in arr.kept_ids]
        assert len(kept) == 1
        assert kept[0].area == pytest.approx(60.0)

    def test_gis_covers_everything(self):
        arr = classify_polygons(fracture_plane(rect_sweeps(), BBOX), [BBOX], None)
        assert len(arr.kept_ids) == 9

    def test_mesh_heights_without_gis(self):
        arr = fracture_plane([sweep((5, -10), (5, 16))], BBOX)
        arr = classify_polygons(arr, [], box_mesh(-10, -10, 5, 16, 3.0), h_min=1.0)
        (k,) = arr.kept_ids
        assert arr.polygons[k].shape.centroid.x < 5


class TestHeightDiffs:
    def test_roof_interior_and_step(self):
        # 6 m slab over x < 5, ground-level nothing beyond
        arr = fracture_plane([sweep((5, -10), (5, 16), 0), sweep((2, -10), (2, 16), 1)], BBOX)
        arr = compute_height_diffs(arr, box_mesh(-10, -10, 5, 16, 6.0))
        by_x = {round(e.segment.a[0], 6): e for e in arr.edges if abs(e.segment.a[0] - e.segment.b[0]) < 1e-9}
        assert by_x[2.0].height_diff == pytest.approx(0.0, abs=1e-9)
        assert by_x[5.0].height_diff == pytest.approx(6.0, abs=1e-6)

    def test_outside_mesh_is_zero(self):
        arr = fracture_plane([sweep((15, -10), (15, 16))], BBOX)
        arr = compute_height_diffs(arr, box_mesh(-10, -10, 0, 0, 6.0))
        inner = [e for e in arr.edges if e.left != OUTSIDE and e.right != OUTSIDE]
        assert all(e.height_diff == 0 for e in inner)
