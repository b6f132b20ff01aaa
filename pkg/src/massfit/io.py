"""File formats: Wavefront OBJ meshes and GeoJSON footprints.

OBJ files written here carry one ``usemtl`` group per face label
(``wall``, ``roof``, ``floor``, ``cap``), always in that order, with
coordinates printed as ``%.6f``. Reading accepts polygonal faces (fan
triangulated), ``v/vt/vn`` references and negative indices.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np
import shapely
from shapely.geometry import shape as shapely_shape

from .extrusion import LABELS, MassModel
from .geometry import Polygon2, TriMesh, polygons_from_shapely

WGS84_A = 6378137.0
WGS84_F = 1 / 298.257223563


class InputError(ValueError):
    """Unreadable or unsupported input file."""


# ---------------------------------------------------------------- OBJ


def read_obj(path) -> tuple[TriMesh, list[str | None]]:
    """Load an OBJ; returns the welded mesh and the material of each triangle.

    Triangles that the load-time cleanup drops are dropped from the material
    list as well.
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read mesh {path}: {e}") from e
    verts, tris, mats = [], [], []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "v":
                verts.append([float(c) for c in parts[1:4]])
            elif tag == "f":
                idx = []
                for ref in parts[1:]:
                    i = int(ref.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for k in range(1, len(idx) - 1):
                    tris.append((idx[0], idx[k], idx[k + 1]))
                    mats.append(current)
            elif tag == "usemtl":
                current = parts[1] if len(parts) > 1 else None
        except (ValueError, IndexError) as e:
            raise InputError(f"{path}:{lineno}: malformed OBJ line {raw!r}") from e
    if not tris:
        raise InputError(f"{path}: mesh has no faces")
    V = np.array(verts, float)
    T = np.array(tris, dtype=np.int64)
    if T.min() < 0 or T.max() >= len(V):
        raise InputError(f"{path}: face index out of range")
    # keep materials aligned with what from_arrays keeps
    mesh = TriMesh.from_arrays(V, T)
    if len(mesh.triangles) != len(T):
        keys = np.round(V / 1e-6).astype(np.int64)
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        c = V[T]
        area = 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
        t = inv[T]
        ok = (area > 1e-9) & (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
        if ok.sum() == len(mesh.triangles):
            mats = [m for m, k in zip(mats, ok) if k]
        else:
            mats = [None] * len(mesh.triangles)
    if mesh.is_empty:
        raise InputError(f"{path}: mesh is empty after cleanup")
    return mesh, mats


def load_mesh(path) -> TriMesh:
    return read_obj(path)[0]


def _fmt(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def obj_text(models: Sequence[MassModel], comment: str | None = None) -> str:
    """OBJ text for one or more models, grouped by label then by model."""
    lines = ["# massfit mass model"]
    if comment:
        lines.append(f"# {comment}")
    offs, off = [], 0
    for m in models:
        offs.append(off)
        for v in m.mesh.vertices:
            lines.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
        off += len(m.mesh.vertices)
    for label in LABELS:
        lines.append(f"usemtl {label}")
        for m, o in zip(models, offs):
            sel = np.nonzero(m.labels == label)[0]
            for t in m.mesh.triangles[sel]:
                lines.append(f"f {t[0] + o + 1} {t[1] + o + 1} {t[2] + o + 1}")
    return "\n".join(lines) + "\n"


def write_obj(path, models: Sequence[MassModel] | MassModel, comment: str | None = None):
    if isinstance(models, MassModel):
        models = [models]
    Path(path).write_text(obj_text(models, comment))


def write_mesh_obj(path, mesh: TriMesh):
    """Plain OBJ for an unlabeled mesh (used for synthetic inputs)."""
    lines = [f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}" for v in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- GeoJSON


def _geometries(doc) -> list[dict]:
    kind = doc.get("type")
    if kind == "FeatureCollection":
        return [g for f in doc.get("features", []) for g in _geometries(f)]
    if kind == "Feature":
        return _geometries(doc["geometry"]) if doc.get("geometry") else []
    if kind == "GeometryCollection":
        return [g for sub in doc.get("geometries", []) for g in _geometries(sub)]
    return [doc]


def _crs_name(doc) -> str | None:
    crs = doc.get("crs")
    if isinstance(crs, dict):
        return str(crs.get("properties", {}).get("name", "")) or None
    return None


def looks_geographic(coords: np.ndarray, crs: str | None = None) -> bool:
    """Decide whether coordinates are lon/lat degrees.

    An explicit CRS wins. Otherwise coordinates count as geographic when
    they fit the lon/lat ranges and span less than half a degree, which no
    metric building footprint does.
    """
    if crs:
        c = crs.upper()
        return "4326" in c or "CRS84" in c
    if len(coords) == 0:
        return False
    lon, lat = coords[:, 0], coords[:, 1]
    in_range = np.all(np.abs(lon) <= 180) and np.all(np.abs(lat) <= 90)
    span = max(np.ptp(lon), np.ptp(lat))
    return bool(in_range and span < 0.5)


def _ecef(lon, lat):
    lon, lat = np.radians(lon), np.radians(lat)
    e2 = WGS84_F * (2 - WGS84_F)
    N = WGS84_A / np.sqrt(1 - e2 * np.sin(lat) ** 2)
    return np.stack([N * np.cos(lat) * np.cos(lon), N * np.cos(lat) * np.sin(lon), N * (1 - e2) * np.sin(lat)], -1)


def enu_project(lonlat: np.ndarray, lon0: float, lat0: float) -> np.ndarray:
    """East/north metres of lon/lat points in the tangent plane at (lon0, lat0)."""
    p = _ecef(lonlat[:, 0], lonlat[:, 1]) - _ecef(np.array(lon0), np.array(lat0))
    lo, la = math.radians(lon0), math.radians(lat0)
    east = np.array([-math.sin(lo), math.cos(lo), 0.0])
    north = np.array([-math.sin(la) * math.cos(lo), -math.sin(la) * math.sin(lo), math.cos(la)])
    return np.column_stack([p @ east, p @ north])


def read_geojson(path, project: bool | None = None) -> tuple[list[Polygon2], dict]:
    """Footprints from a GeoJSON file, in metres.

    Geographic input is projected onto the local tangent plane and shifted
    so that the area centroid of all footprints is the origin. The returned
    dict records what was done (``geographic``, ``origin_lonlat``).
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as e:
        raise InputError(f"cannot read footprints {path}: {e}") from e
    shapes = []
    for g in _geometries(doc):
        if g.get("type") not in ("Polygon", "MultiPolygon"):
            raise InputError(f"{path}: unsupported geometry {g.get('type')!r}; only polygons are footprints")
        try:
            shapes.append(shapely_shape(g))
        except Exception as e:  # shapely raises several types on bad rings
            raise InputError(f"{path}: invalid polygon: {e}") from e
    if not shapes:
        raise InputError(f"{path}: no footprints")
    geom = shapely.union_all(shapes) if len(shapes) > 1 else shapes[0]
    coords = shapely.get_coordinates(geom)
    geographic = looks_geographic(coords, _crs_name(doc)) if project is None else project
    info = {"geographic": geographic, "origin_lonlat": None}
    if geographic:
        c = geom.centroid
        lon0, lat0 = c.x, c.y
        shapes = [shapely.transform(s, lambda xy: enu_project(xy, lon0, lat0)) for s in shapes]
        cc = shapely.union_all(shapes).centroid
        shift = np.array([cc.x, cc.y])
        shapes = [shapely.transform(s, lambda xy: xy - shift) for s in shapes]
        info["origin_lonlat"] = (lon0, lat0)
    return [p for s in shapes for p in polygons_from_shapely(s)], info


def write_geojson(path, footprints: Sequence[Polygon2]):
    feats = []
    for k, p in enumerate(footprints):
        rings = [[[float(x), float(y)] for x, y in r] + [[float(r[0][0]), float(r[0][1])]] for r in p.rings]
        feats.append({"type": "Feature", "properties": {"id": k}, "geometry": {"type": "Polygon", "coordinates": rings}})
    Path(path).write_text(json.dumps({"type": "FeatureCollection", "features": feats}, indent=1) + "\n")


def load_inputs(mesh_path, gis_path=None) -> tuple[TriMesh, list[Polygon2]]:
    """Mesh (OBJ) and footprints (GeoJSON, optional) in metres."""
    mesh = load_mesh(mesh_path)
    gis = read_geojson(gis_path)[0] if gis_path else []
    return mesh, gis
