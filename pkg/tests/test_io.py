import json

import numpy as np
import pytest

from massfit.extrusion import LABELS, extrude
from massfit.geometry import Polygon2, TriMesh
from massfit.io import (
    InputError,
    enu_project,
    load_inputs,
    looks_geographic,
    read_geojson,
    read_obj,
    write_geojson,
    write_mesh_obj,
    write_obj,
)
from massfit.profiles import Profile
from oracles import cube

HIP = Profile(((0.0, 0.0), (1.0, 1.0)))


def write_cube(path, quads=False):
    V, T = cube(0.0, 2.0)
    lines = [f"v {x} {y} {z}" for x, y, z in V]
    if quads:
        lines += [f"f {a + 1} {b + 1} {c + 1} {d + 1}" for a, b, c, d in [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]]
    else:
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in T]
    path.write_text("\n".join(lines) + "\n")
    return path


def square_geojson(path, ring, crs=None):
    doc = {"type": "FeatureCollection", "features": [{"type": "Feature", "properties": {}, "geometry": {"type": "Polygon", "coordinates": [ring + [ring[0]]]}}]}
    if crs:
        doc["crs"] = {"type": "name", "properties": {"name": crs}}
    path.write_text(json.dumps(doc))
    return path


class TestLoadInputs:
    def test_cube_and_square(self, tmp_path):
        obj = write_cube(tmp_path / "cube.obj")
        gj = square_geojson(tmp_path / "fp.geojson", [[0, 0], [2, 0], [2, 2], [0, 2]])
        mesh, gis = load_inputs(obj, gj)
        assert len(mesh.triangles) == 12
        assert len(gis) == 1 and gis[0].area == pytest.approx(4.0)

    def test_quads_are_triangulated(self, tmp_path):
        mesh, _ = read_obj(write_cube(tmp_path / "q.obj", quads=True))
        assert len(mesh.triangles) == 2 * 6

    def test_face_references_and_negative_indices(self, tmp_path):
        p = tmp_path / "t.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/1/1 3/1/1\nf -3 -2 -1\n")
        mesh, _ = read_obj(p)
        assert len(mesh.vertices) == 3

    def test_materials_follow_faces(self, tmp_path):
        p = tmp_path / "m.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nusemtl a\nf 1 2 3\nusemtl b\nf 2 4 3\n")
        _, mats = read_obj(p)
        assert mats == ["a", "b"]

    def test_projected_centroid_at_origin(self, tmp_path):
        lon, lat, d = -0.1420, 51.5173, 2e-4
        ring = [[lon - d, lat - d], [lon + d, lat - d], [lon + d, lat + d], [lon - 2 * d, lat + d]]
        polys, info = read_geojson(square_geojson(tmp_path / "ll.geojson", ring))
        assert info["geographic"]
        c = polys[0].shape.centroid
        assert abs(c.x) < 1e-6 and abs(c.y) < 1e-6
        # about 42 m by 44 m after projection
        minx, miny, maxx, maxy = polys[0].shape.bounds
        assert 30 < maxx - minx < 45 and 40 < maxy - miny < 50

    def test_metric_coordinates_untouched(self, tmp_path):
        ring = [[100, 200], [110, 200], [110, 206], [100, 206]]
        polys, info = read_geojson(square_geojson(tmp_path / "m.geojson", ring))
        assert not info["geographic"]
        assert np.allclose(polys[0].shape.bounds, (100, 200, 110, 206))

    def test_explicit_crs_wins(self, tmp_path):
        ring = [[0.1, 0.1], [0.2, 0.1], [0.2, 0.2], [0.1, 0.2]]
        _, info = read_geojson(square_geojson(tmp_path / "c.geojson", ring, crs="EPSG:27700"))
        assert not info["geographic"]
        assert looks_geographic(np.array(ring))

    def test_enu_matches_small_distance(self):
        # 0.001 degree of latitude is about 111.2 m anywhere near London
        p = enu_project(np.array([[-0.1420, 51.5183]]), -0.1420, 51.5173)
        assert p[0, 0] == pytest.approx(0.0, abs=1e-6)
        assert p[0, 1] == pytest.approx(111.26, abs=0.1)

    @pytest.mark.parametrize(
        "text",
        [
            '{"type": "Point", "coordinates": [0, 0]}',
            '{"type": "LineString", "coordinates": [[0, 0], [1, 1]]}',
            "not json",
            '{"type": "FeatureCollection", "features": []}',
        ],
    )
    def test_bad_geojson(self, tmp_path, text):
        p = tmp_path / "bad.geojson"
        p.write_text(text)
        with pytest.raises(InputError):
            read_geojson(p)

    def test_missing_and_empty_mesh(self, tmp_path):
        with pytest.raises(InputError):
            read_obj(tmp_path / "nope.obj")
        p = tmp_path / "empty.obj"
        p.write_text("v 0 0 0\n")
        with pytest.raises(InputError):
            read_obj(p)
        p.write_text("v 0 0 0\nv 1 0 0\nf 1 2 7\n")
        with pytest.raises(InputError):
            read_obj(p)


class TestExport:
    def test_four_groups_in_order(self, tmp_path):
        m = extrude(Polygon2.box(0, 0, 4, 3), {k: HIP for k in range(4)}, h_cap=0.8)
        p = tmp_path / "model_000.obj"
        write_obj(p, m)
        groups = [line.split()[1] for line in p.read_text().splitlines() if line.startswith("usemtl")]
        assert groups == list(LABELS)

    def test_round_trip(self, tmp_path):
        m = extrude(Polygon2.box(0, 0, 5, 3), {k: HIP for k in range(4)})
        p = tmp_path / "m.obj"
        write_obj(p, m)
        back, mats = read_obj(p)
        assert len(back.vertices) == len(m.mesh.vertices)
        assert len(back.triangles) == m.n_triangles
        assert sorted(mats) == sorted(m.labels.tolist())
        assert np.allclose(np.sort(back.vertices, axis=0), np.sort(m.mesh.vertices, axis=0), atol=1e-6)

    def test_plain_mesh_and_geojson_round_trip(self, tmp_path):
        V, T = cube(0.0, 1.0)
        write_mesh_obj(tmp_path / "c.obj", TriMesh(V, T))
        assert len(read_obj(tmp_path / "c.obj")[0].triangles) == 12
        fps = [Polygon2.box(0, 0, 3, 2), Polygon2.box(5, 0, 6, 1)]
        write_geojson(tmp_path / "f.geojson", fps)
        back, _ = read_geojson(tmp_path / "f.geojson")
        assert sorted(round(p.area, 9) for p in back) == [1.0, 6.0]
