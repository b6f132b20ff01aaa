"""Geometric primitives: triangle meshes, plane slicing, height queries, polygons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
import shapely
from shapely.geometry import MultiPolygon, Polygon

AREA_EPS = 1e-9
LENGTH_EPS = 1e-6
WELD_TOL = 1e-6
SNAP_TOL = 1e-4


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Indexed triangle mesh in meters, Z up.

    Arrays are frozen on construction. Use :meth:`from_arrays` to get the
    load-time cleanup (vertex welding, degenerate triangle removal).
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh has non-finite coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "triangles", _readonly(t))

    @classmethod
    def from_arrays(cls, vertices, triangles, weld: float = WELD_TOL) -> TriMesh:
        """Build a mesh, welding vertices closer than ``weld`` and dropping
        triangles with area below ``AREA_EPS``."""
        v = np.asarray(vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(v) == 0 or len(t) == 0:
            return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
        keys = np.round(v / weld).astype(np.int64)
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(first)
        remap = np.empty_like(order)
        remap[order] = np.arange(len(order))
        v = v[first[order]]
        t = remap[inverse[t]]
        area = 0.5 * np.linalg.norm(
            np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]]), axis=1
        )
        t = t[area > AREA_EPS]
        used = np.unique(t)
        remap = np.full(len(v), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return cls(v[used], remap[t])

    @staticmethod
    def concatenate(meshes: Sequence[TriMesh]) -> TriMesh:
        vs, ts, off = [], [], 0
        for m in meshes:
            vs.append(m.vertices)
            ts.append(m.triangles + off)
            off += len(m.vertices)
        if not vs:
            return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
        return TriMesh(np.vstack(vs), np.vstack(ts))

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    @property
    def corners(self) -> np.ndarray:
        """(m, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_empty:
            raise ValueError("empty mesh has no bounds")
        c = self.corners.reshape(-1, 3)
        return c.min(axis=0), c.max(axis=0)

    @property
    def max_height(self) -> float:
        return float(self.bounds[1][2])

    def face_areas(self) -> np.ndarray:
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def face_normals(self) -> np.ndarray:
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(norm > 0, norm, 1.0)

    @cached_property
    def heightfield(self) -> HeightField:
        return HeightField(self)


@dataclass(frozen=True)
class Segment2:
    """Ground-plane segment with an optional source tag."""

    a: tuple[float, float]
    b: tuple[float, float]
    level: float | None = None
    triangle: int | None = None

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    @property
    def midpoint(self) -> tuple[float, float]:
        return (0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1]))

    @property
    def angle(self) -> float:
        """Undirected direction in [0, pi)."""
        return math.atan2(self.b[1] - self.a[1], self.b[0] - self.a[0]) % math.pi


def signed_area(ring) -> float:
    r = np.asarray(ring, dtype=float)
    x, y = r[:, 0], r[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class Polygon2:
    """Polygon with a counter-clockwise outer ring and clockwise holes.

    Rings are stored open (first point not repeated).
    """

    outer: np.ndarray
    holes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        outer = _open_ring(self.outer)
        if signed_area(outer) < 0:
            outer = outer[::-1].copy()
        holes = []
        for h in self.holes:
            h = _open_ring(h)
            if signed_area(h) > 0:
                h = h[::-1].copy()
            holes.append(_readonly(h))
        object.__setattr__(self, "outer", _readonly(outer))
        object.__setattr__(self, "holes", tuple(holes))

    @classmethod
    def from_shapely(cls, poly: Polygon) -> Polygon2:
        return cls(
            np.asarray(poly.exterior.coords)[:, :2],
            tuple(np.asarray(r.coords)[:, :2] for r in poly.interiors),
        )

    @classmethod
    def box(cls, xmin, ymin, xmax, ymax) -> Polygon2:
        return cls(np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], float))

    @cached_property
    def shape(self) -> Polygon:
        return Polygon(self.outer, [h for h in self.holes])

    @property
    def rings(self) -> tuple:
        return (self.outer,) + self.holes

    @property
    def area(self) -> float:
        return signed_area(self.outer) + sum(signed_area(h) for h in self.holes)

    def edges(self) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        """Yield ``(edge_id, start, end)`` over all rings, outer ring first.

        Edge ids are the flat index used for per-edge profiles.
        """
        k = 0
        for ring in self.rings:
            n = len(ring)
            for i in range(n):
                yield k, ring[i], ring[(i + 1) % n]
                k += 1

    @property
    def n_edges(self) -> int:
        return sum(len(r) for r in self.rings)

    def contains(self, p) -> bool:
        return bool(self.shape.covers(shapely.Point(float(p[0]), float(p[1]))))

    def bbox(self) -> tuple[float, float, float, float]:
        return tuple(float(v) for v in self.shape.bounds)

    def diameter(self) -> float:
        x0, y0, x1, y1 = self.bbox()
        return math.hypot(x1 - x0, y1 - y0)


def _open_ring(ring) -> np.ndarray:
    r = np.array(ring, dtype=float).reshape(-1, 2)
    if len(r) > 1 and np.allclose(r[0], r[-1]):
        r = r[:-1]
    if len(r) < 3:
        raise ValueError("ring needs at least 3 distinct points")
    return r


def polygons_from_shapely(geom) -> list[Polygon2]:
    if geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [Polygon2.from_shapely(geom)]
    if isinstance(geom, MultiPolygon):
        return [Polygon2.from_shapely(g) for g in geom.geoms]
    return [p for g in getattr(geom, "geoms", []) for p in polygons_from_shapely(g)]


def merge_collinear(ring: np.ndarray, angle_deg: float = 0.5, min_len: float = LENGTH_EPS) -> np.ndarray:
    """Drop ring vertices whose turning angle is below ``angle_deg``."""
    pts = [p for p in np.asarray(ring, float)]
    tol = math.radians(angle_deg)
    changed = True
    while changed and len(pts) > 3:
        changed = False
        n = len(pts)
        for i in range(n):
            p0, p1, p2 = pts[i - 1], pts[i], pts[(i + 1) % n]
            d0, d1 = p1 - p0, p2 - p1
            l0, l1 = np.linalg.norm(d0), np.linalg.norm(d1)
            if l0 < min_len or l1 < min_len:
                del pts[i]
                changed = True
                break
            turn = math.atan2(d0[0] * d1[1] - d0[1] * d1[0], float(np.dot(d0, d1)))
            if abs(turn) < tol:
                del pts[i]
                changed = True
                break
    return np.array(pts)


# --------------------------------------------------------------------------
# plane slicing


def _cut_triangles(d: np.ndarray, corners: np.ndarray):
    """Intersect triangles with the zero set of per-corner signed distances.

    ``d`` is (m, 3); ``corners`` is (m, 3, k). Corners on the plane count
    as above it, so every triangle is cut along exactly two edges or not
    at all and the cuts of a closed mesh always chain into closed loops,
    even when the plane passes through vertices. Returns the indices of
    cut triangles and an (n, 2, k) array of segment endpoints.
    """
    up = d >= 0
    idx = np.nonzero(up.any(axis=1) & ~up.all(axis=1))[0]
    if len(idx) == 0:
        return idx, np.zeros((0, 2, corners.shape[2]))
    d = d[idx]
    up = up[idx]
    c = corners[idx]
    cand, mask = [], []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        crosses = up[:, i] != up[:, j]
        # interpolate from the lower corner so both triangles sharing an
        # edge compute bit-identical points
        swap = up[:, i]
        lo = np.where(swap, j, i)
        hi = np.where(swap, i, j)
        r = np.arange(len(d))
        dl, dh = d[r, lo], d[r, hi]
        t = np.where(crosses, dl / np.where(crosses, dl - dh, 1.0), 0.0)
        cl, ch = c[r, lo], c[r, hi]
        cand.append(cl + t[:, None] * (ch - cl))
        mask.append(crosses)
    cand = np.stack(cand, axis=1)
    mask = np.stack(mask, axis=1)
    order = np.argsort(~mask, axis=1, kind="stable")[:, :2]
    seg = np.take_along_axis(cand, order[:, :, None], axis=1)
    return idx, seg


def slice_segments_horizontal(mesh: TriMesh, z: float) -> np.ndarray:
    """Array form of :func:`slice_mesh_horizontal`: (n, 2, 2) endpoints."""
    if mesh.is_empty:
        return np.zeros((0, 2, 2))
    c = mesh.corners
    _, seg = _cut_triangles(c[:, :, 2] - z, c[:, :, :2])
    keep = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1) > LENGTH_EPS
    return seg[keep]


def slice_mesh_horizontal(mesh: TriMesh, z: float) -> list[Segment2]:
    """Cut the mesh with the plane ``height == z`` and project to the ground."""
    if mesh.is_empty:
        return []
    c = mesh.corners
    idx, seg = _cut_triangles(c[:, :, 2] - z, c[:, :, :2])
    out = []
    for t, s in zip(idx, seg):
        if np.hypot(*(s[1] - s[0])) > LENGTH_EPS:
            out.append(Segment2((float(s[0, 0]), float(s[0, 1])), (float(s[1, 0]), float(s[1, 1])), z, int(t)))
    return out


def slice_segments_vertical(mesh: TriMesh, origin, direction) -> np.ndarray:
    """Cut with the vertical plane through ``origin`` containing ``direction``.

    Returns (n, 2, 2) segments in slice coordinates (distance along
    ``direction``, height).
    """
    if mesh.is_empty:
        return np.zeros((0, 2, 2))
    o = np.asarray(origin, float)
    u = np.asarray(direction, float)
    u = u / np.linalg.norm(u)
    m = np.array([-u[1], u[0]])
    c = mesh.corners
    rel = c[:, :, :2] - o
    d = rel @ m
    frame = np.stack([rel @ u, c[:, :, 2]], axis=2)
    _, seg = _cut_triangles(d, frame)
    keep = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1) > LENGTH_EPS
    return seg[keep]


def slice_mesh_vertical(mesh: TriMesh, origin, direction) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Vertical slice as a list of ``((a0, h0), (a1, h1))`` segments."""
    seg = slice_segments_vertical(mesh, origin, direction)
    return [((float(s[0, 0]), float(s[0, 1])), (float(s[1, 0]), float(s[1, 1]))) for s in seg]


def chain_segments(segs: np.ndarray, tol: float = SNAP_TOL) -> list[np.ndarray]:
    """Join segments sharing endpoints (within ``tol``) into polylines.

    Closed loops are returned with the first point repeated at the end.
    """
    if len(segs) == 0:
        return []
    pts = segs.reshape(-1, 2)
    keys = np.round(pts / tol).astype(np.int64)
    _, node = np.unique(keys, axis=0, return_inverse=True)
    node = node.reshape(-1, 2)
    # canonical segment order and orientation: the output then depends
    # only on the set of segments, not on the order they arrived in
    flip = node[:, 0] > node[:, 1]
    node = np.where(flip[:, None], node[:, ::-1], node)
    p2 = pts.reshape(-1, 2, 2)
    p2 = np.where(flip[:, None, None], p2[:, ::-1], p2)
    order = np.lexsort((p2[:, 1, 1], p2[:, 1, 0], p2[:, 0, 1], p2[:, 0, 0], node[:, 1], node[:, 0]))
    node = node[order]
    pts = p2[order].reshape(-1, 2)
    adj: dict[int, list[int]] = {}
    for i, (a, b) in enumerate(node):
        if a == b:
            continue
        adj.setdefault(a, []).append(i)
        adj.setdefault(b, []).append(i)
    used = np.zeros(len(node), bool)
    used[node[:, 0] == node[:, 1]] = True
    coord = {}
    for i, (a, b) in enumerate(node):
        coord.setdefault(a, pts[2 * i])
        coord.setdefault(b, pts[2 * i + 1])

    def walk(start_edge, start_node):
        path = [start_node]
        e, cur = start_edge, start_node
        while True:
            used[e] = True
            a, b = node[e]
            nxt = b if a == cur else a
            path.append(nxt)
            cur = nxt
            cand = [f for f in adj[cur] if not used[f]]
            if len(adj[cur]) != 2 or not cand:
                return path
            e = cand[0]

    lines = []
    # open chains start at nodes of degree != 2
    for n_id in sorted(adj):
        if len(adj[n_id]) == 2:
            continue
        for e in adj[n_id]:
            if not used[e]:
                lines.append(walk(e, n_id))
    for e in range(len(node)):
        if not used[e]:
            lines.append(walk(e, node[e][0]))
    return [np.array([coord[k] for k in path]) for path in lines]


# --------------------------------------------------------------------------
# height queries


class HeightField:
    """Max-height lookup over the ground projection of a mesh.

    Triangles are bucketed on a uniform grid; vertical triangles (zero
    projected area) are ignored.
    """

    def __init__(self, mesh: TriMesh):
        c = mesh.corners
        if len(c):
            x0, y0 = c[:, :, 0], c[:, :, 1]
            det = (x0[:, 1] - x0[:, 0]) * (y0[:, 2] - y0[:, 0]) - (x0[:, 2] - x0[:, 0]) * (y0[:, 1] - y0[:, 0])
            keep = np.abs(det) > 1e-14
            c, det = c[keep], det[keep]
        else:
            det = np.zeros(0)
        self.corners = c
        self.det = det
        self.buckets: dict[tuple[int, int], np.ndarray] = {}
        if len(c) == 0:
            self.cell = 1.0
            return
        lo = c[:, :, :2].min(axis=1)
        hi = c[:, :, :2].max(axis=1)
        ext = float(np.median(np.max(hi - lo, axis=1)))
        self.cell = max(ext, 0.05) * 2.0
        i0 = np.floor(lo / self.cell).astype(np.int64)
        i1 = np.floor(hi / self.cell).astype(np.int64)
        tmp: dict[tuple[int, int], list[int]] = {}
        for t in range(len(c)):
            for i in range(i0[t, 0], i1[t, 0] + 1):
                for j in range(i0[t, 1], i1[t, 1] + 1):
                    tmp.setdefault((i, j), []).append(t)
        self.buckets = {k: np.array(v) for k, v in tmp.items()}

    def query(self, points) -> np.ndarray:
        """Heights at (n, 2) points; NaN where no triangle covers the point."""
        p = np.atleast_2d(np.asarray(points, float))
        out = np.full(len(p), np.nan)
        if not self.buckets or len(p) == 0:
            return out
        cells = np.floor(p / self.cell).astype(np.int64)
        order = np.lexsort((cells[:, 1], cells[:, 0]))
        cs = cells[order]
        brk = np.nonzero(np.any(np.diff(cs, axis=0) != 0, axis=1))[0] + 1
        for grp in np.split(order, brk):
            key = (int(cells[grp[0], 0]), int(cells[grp[0], 1]))
            tri = self.buckets.get(key)
            if tri is None:
                continue
            out[grp] = self._eval(p[grp], tri)
        return out

    def _eval(self, p: np.ndarray, tri: np.ndarray) -> np.ndarray:
        c = self.corners[tri]
        det = self.det[tri]
        x0, y0 = c[:, 0, 0], c[:, 0, 1]
        ex1, ey1 = c[:, 1, 0] - x0, c[:, 1, 1] - y0
        ex2, ey2 = c[:, 2, 0] - x0, c[:, 2, 1] - y0
        px = p[:, None, 0] - x0
        py = p[:, None, 1] - y0
        l1 = (px * ey2 - ex2 * py) / det
        l2 = (ex1 * py - px * ey1) / det
        l0 = 1.0 - l1 - l2
        inside = (l0 >= -1e-12) & (l1 >= -1e-12) & (l2 >= -1e-12)
        z = l0 * c[:, 0, 2] + l1 * c[:, 1, 2] + l2 * c[:, 2, 2]
        z = np.where(inside, z, -np.inf)
        best = z.max(axis=1)
        return np.where(np.isfinite(best), best, np.nan)


def height_field_query(mesh: TriMesh, p) -> float | None:
    """Highest mesh point above ``p``, or ``None`` if nothing covers it."""
    h = mesh.heightfield.query(np.asarray(p, float).reshape(1, 2))[0]
    return None if np.isnan(h) else float(h)


def heights_at(mesh: TriMesh, points) -> np.ndarray:
    return mesh.heightfield.query(points)


# --------------------------------------------------------------------------
# polygon triangulation (keeps every input vertex; no Steiner points)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _in_triangle(p, a, b, c, eps) -> bool:
    return _cross(a, b, p) >= -eps and _cross(b, c, p) >= -eps and _cross(c, a, p) >= -eps


def _touching_vertex(pts: np.ndarray, ring: list[int], hole: list[int]):
    for k, i in enumerate(ring):
        for h, j in enumerate(hole):
            if np.linalg.norm(pts[i] - pts[j]) < 1e-9:
                return k, h
    return None


def _bridge_holes(pts: np.ndarray, outer: list[int], holes: list[list[int]]) -> list[int]:
    """Splice hole rings into the outer ring via mutually visible bridges."""
    ring = list(outer)
    for hole in sorted(holes, key=lambda h: -max(pts[i][0] for i in h)):
        touch = _touching_vertex(pts, ring, hole)
        if touch is not None:
            # a hole pinching the ring at a shared point is spliced in there
            k, h = touch
            ring = ring[: k + 1] + hole[h + 1 :] + hole[: h + 1] + ring[k + 1 :]
            continue
        m_pos = max(range(len(hole)), key=lambda k: (pts[hole[k]][0], -pts[hole[k]][1]))
        m = pts[hole[m_pos]]
        best, best_x = None, math.inf
        n = len(ring)
        for k in range(n):
            a, b = pts[ring[k]], pts[ring[(k + 1) % n]]
            if (a[1] - m[1]) * (b[1] - m[1]) > 0 or a[1] == b[1]:
                continue
            t = (m[1] - a[1]) / (b[1] - a[1])
            x = a[0] + t * (b[0] - a[0])
            if x >= m[0] - 1e-12 and x < best_x:
                best_x = x
                best = k if a[0] > b[0] else (k + 1) % n
        if best is None:
            raise ValueError("hole not enclosed by outer ring")
        p = pts[ring[best]]
        hit = np.array([best_x, m[1]])
        # a reflex vertex inside (m, hit, p) blocks visibility; take the one with the smallest angle
        cand = best
        min_ang = math.inf
        for k in range(n):
            q = pts[ring[k]]
            if k == best or q[0] < m[0]:
                continue
            tri = (m, hit, p) if _cross(m, hit, p) >= 0 else (m, p, hit)
            if _in_triangle(q, *tri, 1e-12):
                prv, nxt = pts[ring[k - 1]], pts[ring[(k + 1) % n]]
                if _cross(prv, q, nxt) < 0:
                    ang = abs(math.atan2(q[1] - m[1], q[0] - m[0]))
                    if ang < min_ang:
                        min_ang, cand = ang, k
        hole_seq = hole[m_pos:] + hole[:m_pos] + [hole[m_pos]]
        ring = ring[: cand + 1] + hole_seq + ring[cand:]
    return ring


def _ear_clip(pts: np.ndarray, ring: list[int]) -> list[tuple[int, int, int]]:
    ring = list(ring)
    tris = []
    scale = float(np.ptp(pts[ring], axis=0).max()) if ring else 1.0
    eps = 1e-12 * max(scale, 1.0) ** 2
    guard = 0
    while len(ring) > 3 and guard < 10 * len(pts) ** 2 + 100:
        guard += 1
        n = len(ring)
        found = False
        best_k, best_c = None, -math.inf
        for k in range(n):
            i0, i1, i2 = ring[k - 1], ring[k], ring[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            cr = _cross(a, b, c)
            if cr <= eps:
                continue
            if cr > best_c:
                best_c, best_k = cr, k
            ok = True
            for j in ring:
                if j in (i0, i1, i2):
                    continue
                q = pts[j]
                if (q == a).all() or (q == b).all() or (q == c).all():
                    continue
                if _in_triangle(q, a, b, c, eps):
                    ok = False
                    break
            if ok:
                tris.append((i0, i1, i2))
                del ring[k]
                found = True
                break
        if not found:
            if best_k is None:
                # remaining ring has no area
                return tris
            k = best_k
            tris.append((ring[k - 1], ring[k], ring[(k + 1) % n]))
            del ring[k]
    if len(ring) == 3 and _cross(pts[ring[0]], pts[ring[1]], pts[ring[2]]) > eps:
        tris.append(tuple(ring))
    return tris


def triangulate_polygon(outer, holes=()) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Ear-clip a polygon with holes without adding vertices.

    Returns the stacked points (outer then holes, in input order) and
    counter-clockwise triangles indexing into them. Collinear vertices are
    kept, which matters for watertight assembly.
    """
    rings = [np.asarray(outer, float)] + [np.asarray(h, float) for h in holes]
    pts = np.vstack(rings)
    idx, off = [], 0
    for r in rings:
        idx.append(list(range(off, off + len(r))))
        off += len(r)
    outer_idx = idx[0] if signed_area(rings[0]) >= 0 else idx[0][::-1]
    hole_idx = [h if signed_area(r) <= 0 else h[::-1] for h, r in zip(idx[1:], rings[1:])]
    ring = _bridge_holes(pts, outer_idx, hole_idx) if hole_idx else outer_idx
    return pts, _ear_clip(pts, ring)


def triangulate_planar_face(points3: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a planar 3D polygon (ordered ring), preserving its winding."""
    p = np.asarray(points3, float)
    if len(p) == 3:
        return [(0, 1, 2)]
    n = np.zeros(3)
    for i in range(len(p)):
        a, b = p[i], p[(i + 1) % len(p)]
        n += np.array([(a[1] - b[1]) * (a[2] + b[2]), (a[2] - b[2]) * (a[0] + b[0]), (a[0] - b[0]) * (a[1] + b[1])])
    ax = int(np.argmax(np.abs(n)))
    keep = [i for i in range(3) if i != ax]
    q = p[:, keep]
    # the dropped-axis projection flips handedness for the y axis
    flip = (n[ax] < 0) != (ax == 1)
    if flip:
        q = q[::-1]
    _, tris = triangulate_polygon(q)
    m = len(p)
    if len(tris) != m - 2:
        # too small to project reliably; any fan keeps the edges matched
        return [(0, i, i + 1) for i in range(1, m - 1)]
    if flip:
        return [(m - 1 - a, m - 1 - c, m - 1 - b) for a, b, c in tris]
    return tris


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, float) for v in (p, a, b))
    d = b - a
    L2 = float(d @ d)
    t = 0.0 if L2 == 0 else min(1.0, max(0.0, float((p - a) @ d) / L2))
    return float(np.linalg.norm(p - (a + t * d)))


def segment_distance(a0, a1, b0, b1) -> float:
    """Minimum distance between two 2D segments."""
    a0, a1, b0, b1 = (np.asarray(v, float) for v in (a0, a1, b0, b1))
    if _segments_intersect(a0, a1, b0, b1):
        return 0.0
    return min(
        point_segment_distance(a0, b0, b1),
        point_segment_distance(a1, b0, b1),
        point_segment_distance(b0, a0, a1),
        point_segment_distance(b1, a0, a1),
    )


def _segments_intersect(a0, a1, b0, b1) -> bool:
    d1 = _cross(b0, b1, a0)
    d2 = _cross(b0, b1, a1)
    d3 = _cross(a0, a1, b0)
    d4 = _cross(a0, a1, b1)
    return (d1 * d2 < 0) and (d3 * d4 < 0)
