"""Ground-plane fracturing by sweep-edge lines and inside/outside classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import shapely
from shapely.ops import unary_union

from .geometry import LENGTH_EPS, Polygon2, Segment2, TriMesh, heights_at, signed_area
from .sweep import SweepEdge

OUTSIDE = -1
VERTEX_TOL = 1e-6


class DegenerateInput(ValueError):
    """Raised when no arrangement polygon belongs to a building."""


@dataclass(frozen=True)
class ArrEdge:
    """One fragment of the arrangement between two vertices.

    ``left``/``right`` are polygon ids (or ``OUTSIDE``) seen walking from
    vertex ``a`` to ``b``. ``line`` indexes the sweep line the fragment lies
    on, or is -1 for the working-box boundary.
    """

    a: int
    b: int
    segment: Segment2
    line: int
    is_sweep: bool
    sweep_origin: int | None = None
    continuation_of: int | None = None
    left: int = OUTSIDE
    right: int = OUTSIDE
    height_diff: float = 0.0

    @property
    def length(self) -> float:
        return self.segment.length


@dataclass(frozen=True)
class Arrangement:
    vertices: np.ndarray
    edges: tuple[ArrEdge, ...]
    polygons: dict[int, Polygon2]
    polygon_edges: dict[int, tuple[int, ...]]
    bbox: Polygon2
    n_gis: int | None = None
    removed: frozenset = field(default_factory=frozenset)

    @property
    def kept_ids(self) -> list[int]:
        return sorted(k for k in self.polygons if k not in self.removed)

    def is_kept(self, pid: int) -> bool:
        return pid != OUTSIDE and pid not in self.removed

    def active_edges(self) -> list[int]:
        """Edges bordering at least one kept polygon."""
        return [i for i, e in enumerate(self.edges) if self.is_kept(e.left) or self.is_kept(e.right)]

    def is_forced(self, i: int) -> bool:
        e = self.edges[i]
        return not (self.is_kept(e.left) and self.is_kept(e.right))

    def side_ids(self, i: int) -> tuple[int, int]:
        e = self.edges[i]
        return (e.left if self.is_kept(e.left) else OUTSIDE, e.right if self.is_kept(e.right) else OUTSIDE)


@dataclass
class _Line:
    point: np.ndarray
    unit: np.ndarray
    sweeps: list[int]
    t0: float = 0.0
    t1: float = 0.0

    @property
    def normal(self) -> np.ndarray:
        return np.array([-self.unit[1], self.unit[0]])

    def param(self, p) -> float:
        return float((np.asarray(p) - self.point) @ self.unit)

    def at(self, t: float) -> np.ndarray:
        return self.point + t * self.unit


def _clip_to_convex(line: _Line, ring: np.ndarray) -> tuple[float, float] | None:
    t0, t1 = -math.inf, math.inf
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        d = b - a
        inward = np.array([-d[1], d[0]])
        denom = float(inward @ line.unit)
        num = float(inward @ (line.point - a))
        if abs(denom) < 1e-15:
            if num < 0:
                return None
            continue
        t = -num / denom
        if denom > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
    if t1 - t0 <= LENGTH_EPS:
        return None
    return t0, t1


class _VertexSet:
    def __init__(self, tol: float = VERTEX_TOL):
        self.tol = tol
        self.pts: list[np.ndarray] = []
        self.grid: dict[tuple[int, int], list[int]] = {}

    def add(self, p) -> int:
        p = np.asarray(p, float)
        key = tuple(np.floor(p / self.tol).astype(np.int64))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for i in self.grid.get((key[0] + dx, key[1] + dy), ()):
                    if np.hypot(*(self.pts[i] - p)) <= self.tol:
                        return i
        self.pts.append(p)
        self.grid.setdefault(key, []).append(len(self.pts) - 1)
        return len(self.pts) - 1


def fracture_plane(
    sweeps: Sequence[SweepEdge],
    bbox: Polygon2,
    merge_dist: float = 0.05,
    merge_angle: float = math.radians(0.5),
    continuations_count_as_sweep: bool = True,
) -> Arrangement:
    """Split ``bbox`` by the full lines through every sweep edge.

    Sweeps are taken longest first; a sweep whose line nearly coincides
    with an earlier one (within ``merge_dist`` and ``merge_angle``) shares
    that line. Fragments inside a sweep's own extent record it in
    ``sweep_origin``; the rest are continuations.
    """
    order = sorted(range(len(sweeps)), key=lambda i: (-sweeps[i].length, i))
    lines: list[_Line] = []
    for i in order:
        s = sweeps[i].segment
        a, b = np.array(s.a), np.array(s.b)
        u = (b - a) / s.length
        mid = 0.5 * (a + b)
        merged = False
        for ln in lines:
            ang = abs(((math.atan2(u[1], u[0]) - math.atan2(ln.unit[1], ln.unit[0])) + math.pi / 2) % math.pi - math.pi / 2)
            if ang <= merge_angle and abs(float((mid - ln.point) @ ln.normal)) <= merge_dist:
                ln.sweeps.append(i)
                merged = True
                break
        if not merged:
            lines.append(_Line(a, u, [i]))

    ring = bbox.outer
    kept_lines = []
    for ln in lines:
        clip = _clip_to_convex(ln, ring)
        if clip is not None:
            ln.t0, ln.t1 = clip
            kept_lines.append(ln)
    lines = kept_lines

    verts = _VertexSet()
    on_line: list[list[int]] = [[] for _ in lines]
    for k, ln in enumerate(lines):
        on_line[k] += [verts.add(ln.at(ln.t0)), verts.add(ln.at(ln.t1))]
        for si in ln.sweeps:
            s = sweeps[si].segment
            for p in (s.a, s.b):
                t = min(max(ln.param(p), ln.t0), ln.t1)
                on_line[k].append(verts.add(ln.at(t)))
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            li, lj = lines[i], lines[j]
            den = li.unit[0] * lj.unit[1] - li.unit[1] * lj.unit[0]
            if abs(den) < 1e-12:
                continue
            d = lj.point - li.point
            t = (d[0] * lj.unit[1] - d[1] * lj.unit[0]) / den
            s = (d[0] * li.unit[1] - d[1] * li.unit[0]) / den
            if li.t0 - VERTEX_TOL <= t <= li.t1 + VERTEX_TOL and lj.t0 - VERTEX_TOL <= s <= lj.t1 + VERTEX_TOL:
                v = verts.add(li.at(t))
                on_line[i].append(v)
                on_line[j].append(v)

    n_ring = len(ring)
    corner_ids = [verts.add(p) for p in ring]
    on_side: list[list[int]] = [[corner_ids[i], corner_ids[(i + 1) % n_ring]] for i in range(n_ring)]
    for k, ln in enumerate(lines):
        for t in (ln.t0, ln.t1):
            p = ln.at(t)
            for i in range(n_ring):
                a, b = ring[i], ring[(i + 1) % n_ring]
                d = b - a
                L = float(np.hypot(*d))
                along = float((p - a) @ d) / L
                if -VERTEX_TOL <= along <= L + VERTEX_TOL and abs((p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0]) / L <= VERTEX_TOL * 10:
                    on_side[i].append(verts.add(p))

    V = np.array(verts.pts)
    raw_edges: list[dict] = []
    seen: set[tuple[int, int]] = set()

    def add_edge(a: int, b: int, line: int, is_sweep: bool, origin, cont):
        key = (min(a, b), max(a, b))
        if a == b or key in seen:
            return
        seen.add(key)
        raw_edges.append(dict(a=a, b=b, line=line, is_sweep=is_sweep, sweep_origin=origin, continuation_of=cont))

    for k, ln in enumerate(lines):
        ids = sorted(set(on_line[k]), key=lambda v: ln.param(V[v]))
        spans = []
        for si in ln.sweeps:
            s = sweeps[si].segment
            ta, tb = sorted((ln.param(s.a), ln.param(s.b)))
            spans.append((si, ta, tb))
        for a, b in zip(ids[:-1], ids[1:]):
            tm = 0.5 * (ln.param(V[a]) + ln.param(V[b]))
            origin = next((si for si, ta, tb in spans if ta - 1e-9 <= tm <= tb + 1e-9), None)
            is_sweep = origin is not None or continuations_count_as_sweep
            add_edge(a, b, k, is_sweep, origin, None if origin is not None else ln.sweeps[0])
    for i in range(n_ring):
        a0, d = ring[i], ring[(i + 1) % n_ring] - ring[i]
        ids = sorted(set(on_side[i]), key=lambda v: float((V[v] - a0) @ d))
        for a, b in zip(ids[:-1], ids[1:]):
            add_edge(a, b, -1, False, None, None)

    # faces by half-edge walking; the face is on the left of each half-edge
    out_half: dict[int, list[tuple[float, int, int]]] = {}
    for ei, e in enumerate(raw_edges):
        for u, v in ((e["a"], e["b"]), (e["b"], e["a"])):
            d = V[v] - V[u]
            out_half.setdefault(u, []).append((math.atan2(d[1], d[0]), v, ei))
    for u in out_half:
        out_half[u].sort()
    face_of: dict[tuple[int, int], int] = {}
    cycles: list[list[tuple[int, int]]] = []
    for ei, e in enumerate(raw_edges):
        for start in ((e["a"], e["b"]), (e["b"], e["a"])):
            if start in face_of:
                continue
            cyc = []
            h = start
            while h not in face_of:
                face_of[h] = len(cycles)
                cyc.append(h)
                u, v = h
                lst = out_half[v]
                k = next(i for i, (_, w, _) in enumerate(lst) if w == u)
                h = (v, lst[k - 1][1])
            cycles.append(cyc)

    polygons: dict[int, Polygon2] = {}
    polygon_half: dict[int, list[tuple[int, int]]] = {}
    cyc_to_pid: dict[int, int] = {}
    for ci, cyc in enumerate(cycles):
        pts = V[[u for u, _ in cyc]]
        if signed_area(pts) <= 0:
            cyc_to_pid[ci] = OUTSIDE
            continue
        pid = len(polygons)
        cyc_to_pid[ci] = pid
        polygons[pid] = Polygon2(pts)
        polygon_half[pid] = cyc

    edge_index = {(min(e["a"], e["b"]), max(e["a"], e["b"])): i for i, e in enumerate(raw_edges)}
    edges = []
    for e in raw_edges:
        a, b = e["a"], e["b"]
        seg = Segment2((float(V[a][0]), float(V[a][1])), (float(V[b][0]), float(V[b][1])))
        edges.append(
            ArrEdge(
                a, b, seg, e["line"], e["is_sweep"], e["sweep_origin"], e["continuation_of"],
                left=cyc_to_pid[face_of[(a, b)]], right=cyc_to_pid[face_of[(b, a)]],
            )
        )
    polygon_edges = {
        pid: tuple(edge_index[(min(u, v), max(u, v))] for u, v in cyc) for pid, cyc in polygon_half.items()
    }
    return Arrangement(V, tuple(edges), polygons, polygon_edges, bbox)


def working_bbox(gis: Sequence[Polygon2], mesh: TriMesh | None = None, margin: float = 5.0) -> Polygon2:
    """GIS bounding box (or mesh footprint box without GIS) dilated by ``margin``."""
    if gis:
        b = np.array([p.bbox() for p in gis])
        x0, y0, x1, y1 = b[:, 0].min(), b[:, 1].min(), b[:, 2].max(), b[:, 3].max()
    elif mesh is not None and not mesh.is_empty:
        lo, hi = mesh.bounds
        x0, y0, x1, y1 = lo[0], lo[1], hi[0], hi[1]
    else:
        raise ValueError("need GIS footprints or a mesh to size the working box")
    return Polygon2.box(x0 - margin, y0 - margin, x1 + margin, y1 + margin)


def _grid_points(poly: Polygon2, step: float) -> np.ndarray:
    x0, y0, x1, y1 = poly.bbox()
    xs = np.arange(math.floor(x0 / step) * step + step / 2, x1, step)
    ys = np.arange(math.floor(y0 / step) * step + step / 2, y1, step)
    if len(xs) == 0 or len(ys) == 0:
        return np.zeros((0, 2))
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return pts[shapely.contains_xy(poly.shape, pts[:, 0], pts[:, 1])]


def classify_polygons(
    arr: Arrangement,
    gis: Sequence[Polygon2],
    mesh: TriMesh | None,
    h_min: float = 1.0,
    d_gis: float = 2.0,
    grid: float = 0.5,
) -> Arrangement:
    """Mark polygons outside the buildings as removed.

    A polygon stays if its representative point is inside a GIS footprint
    dilated by ``d_gis``, or if the mean mesh height over a ``grid``-spaced
    sample of its interior exceeds ``h_min`` (uncovered samples count as 0).
    """
    if h_min < 0:
        raise ValueError("h_min must be non-negative")
    region = unary_union([p.shape for p in gis]).buffer(d_gis) if gis else None
    removed = set()
    for pid in sorted(arr.polygons):
        poly = arr.polygons[pid]
        rp = poly.shape.representative_point()
        if region is not None and region.covers(rp):
            continue
        if mesh is not None and not mesh.is_empty:
            pts = _grid_points(poly, grid)
            if len(pts) == 0:
                pts = np.array([[rp.x, rp.y]])
            h = np.nan_to_num(heights_at(mesh, pts), nan=0.0)
            if float(h.mean()) > h_min:
                continue
        removed.add(pid)
    if len(removed) == len(arr.polygons):
        raise DegenerateInput("no arrangement polygon lies inside a building")
    return replace(arr, removed=frozenset(removed), n_gis=len(gis) if gis else arr.n_gis)


def compute_height_diffs(arr: Arrangement, mesh: TriMesh, k: int = 8, delta: float = 0.4) -> Arrangement:
    """Fill ``height_diff``: mean |h_left - h_right| over ``k`` samples per edge,
    probing ``delta`` m to each side; uncovered probes read as height 0."""
    active = set(arr.active_edges())
    edges = list(arr.edges)
    if mesh is None or mesh.is_empty or not active:
        return arr
    ids = sorted(active)
    probes = []
    for i in ids:
        s = edges[i].segment
        a, b = np.array(s.a), np.array(s.b)
        d = (b - a) / s.length
        n = np.array([-d[1], d[0]])
        t = (np.arange(k) + 0.5) / k
        p = a + t[:, None] * (b - a)
        probes.append(np.vstack([p + delta * n, p - delta * n]))
    h = np.nan_to_num(heights_at(mesh, np.vstack(probes)), nan=0.0).reshape(len(ids), 2, k)
    diffs = np.abs(h[:, 0] - h[:, 1]).mean(axis=1)
    for i, hd in zip(ids, diffs):
        edges[i] = replace(edges[i], height_diff=float(hd))
    return replace(arr, edges=tuple(edges))
