"""Sweep-edge extraction: slice the mesh, snap to GIS, cluster, filter by area."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from shapely.geometry import LineString
from shapely.ops import unary_union

from .geometry import (
    LENGTH_EPS,
    Polygon2,
    Segment2,
    TriMesh,
    chain_segments,
    slice_segments_horizontal,
)

DEFAULT_INTERVAL = 0.2
DEFAULT_GAMMA = 10.0
DEFAULT_MIN_SLOPE = 60.0


@dataclass(frozen=True)
class SliceContour:
    """One straight piece of a horizontal slice.

    ``snapped`` holds the exact direction (mod pi) of the GIS edge the piece
    was aligned to; rebuilding the endpoints from it loses that exactness.
    """

    segment: Segment2
    level: float
    snapped: float | None = None

    @property
    def length(self) -> float:
        return self.segment.length

    @property
    def angle(self) -> float:
        return self.segment.angle if self.snapped is None else self.snapped


@dataclass
class DirectionCluster:
    """Contours sharing a direction and supporting line.

    ``direction`` is in [0, pi); ``offset`` is the signed distance of the
    supporting line from the origin along the left normal of ``direction``.
    """

    direction: float
    offset: float
    members: list[SliceContour] = field(default_factory=list)
    interval: float = DEFAULT_INTERVAL

    @property
    def supported_area(self) -> float:
        return sum(m.length for m in self.members) * self.interval

    @property
    def unit(self) -> np.ndarray:
        return np.array([math.cos(self.direction), math.sin(self.direction)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([-math.sin(self.direction), math.cos(self.direction)])


@dataclass(frozen=True)
class SweepEdge:
    segment: Segment2
    supported_area: float
    cluster_id: int
    angle: float | None = None

    @property
    def length(self) -> float:
        return self.segment.length

    @property
    def direction(self) -> float:
        """Direction in [0, pi): the cluster's when known, else the segment's."""
        return (self.segment.angle if self.angle is None else self.angle) % math.pi


def slice_levels(top: float, interval: float) -> np.ndarray:
    """Heights ``interval, 2*interval, ...`` strictly below ``top``."""
    n = int(math.floor(top / interval + 1e-9))
    levels = interval * np.arange(1, n + 1)
    return levels[levels < top - 1e-9]


def douglas_peucker(points: np.ndarray, tol: float) -> np.ndarray:
    """Ramer-Douglas-Peucker simplification of an open polyline."""
    pts = np.asarray(points, float)
    if len(pts) < 3 or tol <= 0:
        return pts
    keep = np.zeros(len(pts), bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        a, b = pts[i], pts[j]
        d = b - a
        L = math.hypot(*d[:2]) if pts.shape[1] == 2 else float(np.linalg.norm(d))
        seg = pts[i + 1 : j]
        if L < 1e-12:
            dist = np.linalg.norm(seg - a, axis=1)
        else:
            rel = seg - a
            t = np.clip(rel @ d / (L * L), 0.0, 1.0)
            dist = np.linalg.norm(rel - t[:, None] * d, axis=1)
        k = int(np.argmax(dist))
        if dist[k] > tol:
            keep[i + 1 + k] = True
            stack.append((i, i + 1 + k))
            stack.append((i + 1 + k, j))
    return pts[keep]


NORMAL_SMOOTHING_ROUNDS = 2


def smoothed_face_normals(mesh: TriMesh, rounds: int = NORMAL_SMOOTHING_ROUNDS) -> np.ndarray:
    """Unit face normals averaged over a few rings of neighbouring faces.

    Each round spreads area-weighted normals to the vertices and back. On
    small noisy triangles a single face normal says little about the
    surface it samples; two rounds cover roughly half a metre.
    """
    P = mesh.vertices[mesh.triangles]
    N = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    if rounds > 0:
        F = len(mesh.triangles)
        A = sp.csr_matrix((np.ones(3 * F), (np.repeat(np.arange(F), 3), mesh.triangles.ravel())), shape=(F, len(mesh.vertices)))
        for _ in range(rounds):
            N = A @ (A.T @ N)
    norm = np.linalg.norm(N, axis=1)
    return N / np.where(norm > 0, norm, 1.0)[:, None]


def extract_contours(
    mesh: TriMesh,
    interval: float = DEFAULT_INTERVAL,
    simplify_tol: float = 0.0,
    min_slope: float = DEFAULT_MIN_SLOPE,
) -> list[SliceContour]:
    """Slice the mesh at every ``interval`` above ground.

    Only triangles whose smoothed normal is at least ``min_slope`` degrees
    from vertical are cut: a noisy flat roof lying on a slice level would otherwise scatter short
    pieces in every direction, and those can add up to a phantom wall.

    With ``simplify_tol > 0`` the per-triangle pieces of each level are
    chained into polylines and simplified before being split back into
    straight contours; noisy walls then come out as a few long segments
    instead of hundreds of short, jittery ones.
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    if not 0 <= min_slope <= 90:
        raise ValueError("min_slope must lie in [0, 90] degrees")
    if mesh.is_empty:
        return []
    if min_slope > 0:
        steep = np.abs(smoothed_face_normals(mesh)[:, 2]) <= math.cos(math.radians(min_slope)) + 1e-12
        if not steep.all():
            mesh = TriMesh(mesh.vertices, mesh.triangles[steep])
        if mesh.is_empty:
            return []
    out = []
    for z in slice_levels(mesh.max_height, interval):
        segs = slice_segments_horizontal(mesh, float(z))
        if simplify_tol > 0:
            pieces = []
            for line in chain_segments(segs):
                line = douglas_peucker(line, simplify_tol)
                pieces.extend(zip(line[:-1], line[1:]))
        else:
            pieces = [(s[0], s[1]) for s in segs]
        for a, b in pieces:
            if math.hypot(b[0] - a[0], b[1] - a[1]) > LENGTH_EPS:
                out.append(SliceContour(Segment2((float(a[0]), float(a[1])), (float(b[0]), float(b[1])), float(z)), float(z)))
    return out


def _wrap_half(a: float) -> float:
    """Wrap an angle difference to [-pi/2, pi/2)."""
    return (a + math.pi / 2) % math.pi - math.pi / 2


def _rotate_about_mid(seg: Segment2, angle: float) -> Segment2:
    m = seg.midpoint
    h = seg.length / 2
    ux, uy = math.cos(angle), math.sin(angle)
    # keep the original endpoint order
    if (seg.b[0] - seg.a[0]) * ux + (seg.b[1] - seg.a[1]) * uy < 0:
        ux, uy = -ux, -uy
    return Segment2((m[0] - h * ux, m[1] - h * uy), (m[0] + h * ux, m[1] + h * uy), seg.level, seg.triangle)


def align_to_gis(
    contours: Sequence[SliceContour],
    gis: Sequence[Polygon2],
    theta_snap: float = math.radians(10),
    d_snap: float = 1.0,
) -> list[SliceContour]:
    """Rotate contours lying near a GIS edge onto that edge's exact direction."""
    edges = []
    for poly in gis:
        for _, a, b in poly.edges():
            d = b - a
            L = float(np.hypot(*d))
            if L > LENGTH_EPS:
                edges.append((a, d / L, L, math.atan2(d[1], d[0]) % math.pi))
    if not edges:
        return list(contours)
    out = []
    for c in contours:
        m = np.array(c.segment.midpoint)
        ang = c.segment.angle
        best, best_d = None, math.inf
        for a, u, L, e_ang in edges:
            if abs(_wrap_half(ang - e_ang)) > theta_snap:
                continue
            rel = m - a
            t = float(rel @ u)
            if t < -d_snap or t > L + d_snap:
                continue
            dist = abs(float(rel[0] * u[1] - rel[1] * u[0]))
            if dist <= d_snap and dist < best_d:
                best, best_d = e_ang, dist
        if best is None:
            out.append(c)
        else:
            out.append(SliceContour(_rotate_about_mid(c.segment, best), c.level, best))
    return out


class _Accumulator:
    """Running length-weighted direction and offset of one cluster."""

    def __init__(self, c: SliceContour):
        self.ref = c.angle
        self.w = 0.0
        self.dsum = 0.0
        self.mx = 0.0
        self.my = 0.0
        self.members: list[SliceContour] = []
        self.add(c)

    def add(self, c: SliceContour):
        L = c.length
        mx, my = c.segment.midpoint
        self.w += L
        self.dsum += L * _wrap_half(c.angle - self.ref)
        self.mx += L * float(mx)
        self.my += L * float(my)
        self.members.append(c)
        # exact when all members share the reference direction
        self.angle = self.ref + self.dsum / self.w if self.dsum else self.ref
        self.sin = math.sin(self.angle)
        self.cos = math.cos(self.angle)
        self.offset = self.offset_of(self.centroid)

    @property
    def centroid(self) -> tuple[float, float]:
        return self.mx / self.w, self.my / self.w

    @property
    def msum(self) -> np.ndarray:
        return np.array([self.mx, self.my])

    def offset_of(self, p) -> float:
        return -self.sin * p[0] + self.cos * p[1]


def _merge_accumulators(accs: list[_Accumulator], theta_tol: float, d_tol: float) -> list[_Accumulator]:
    """Join clusters that the same test would have put together.

    The greedy pass can seed a cluster from a stray corner piece that later
    collects most of a wall; this sweep folds such twins together.
    """
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(accs):
            a = accs[i]
            j = i + 1
            while j < len(accs):
                b = accs[j]
                if abs(_wrap_half(a.angle - b.angle)) <= theta_tol and abs(a.offset_of(b.centroid) - a.offset) <= d_tol:
                    for m in b.members:
                        a.add(m)
                    del accs[j]
                    changed = True
                else:
                    j += 1
            i += 1
    return accs


def cluster_contours(
    contours: Sequence[SliceContour],
    theta_tol: float = math.radians(15),
    d_tol: float = 0.5,
    interval: float = DEFAULT_INTERVAL,
) -> list[DirectionCluster]:
    """Greedy clustering by direction (mod pi) and supporting-line offset.

    Contours are visited by level, then by decreasing length, so the result
    does not depend on mesh triangle order.
    """
    order = sorted(
        contours,
        key=lambda c: (c.level, -round(c.length, 9), round(c.segment.midpoint[0], 9), round(c.segment.midpoint[1], 9)),
    )
    accs: list[_Accumulator] = []
    for c in order:
        mx, my = (float(v) for v in c.segment.midpoint)
        ang = c.angle
        best, best_d = None, math.inf
        for acc in accs:
            if abs(_wrap_half(ang - acc.angle)) > theta_tol:
                continue
            d = abs(-acc.sin * mx + acc.cos * my - acc.offset)
            if d <= d_tol and d < best_d:
                best, best_d = acc, d
        if best is None:
            accs.append(_Accumulator(c))
        else:
            best.add(c)
    accs = _merge_accumulators(accs, theta_tol, d_tol)
    out = []
    for acc in accs:
        ang = acc.angle % math.pi
        off = -math.sin(ang) * acc.msum[0] / acc.w + math.cos(ang) * acc.msum[1] / acc.w
        out.append(DirectionCluster(ang, off, acc.members, interval))
    return out


def sweep_edges_from_clusters(
    clusters: Sequence[DirectionCluster],
    gamma: float = DEFAULT_GAMMA,
    gis: Sequence[Polygon2] | None = None,
    clip_margin: float = 2.0,
) -> list[SweepEdge]:
    """Keep clusters supported by at least ``gamma`` m^2 and project them down.

    The edge spans the hull of the member projections onto the cluster line,
    clipped to the GIS footprints dilated by ``clip_margin``.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    region = None
    if gis:
        region = unary_union([p.shape for p in gis]).buffer(clip_margin)
    out = []
    for cid, cl in enumerate(clusters):
        area = cl.supported_area
        if area < gamma:
            continue
        u, n = cl.unit, cl.normal
        ts = [float(np.dot(u, p)) for m in cl.members for p in (m.segment.a, m.segment.b)]
        t0, t1 = min(ts), max(ts)
        base = n * cl.offset
        if region is not None:
            clipped = LineString([base + t0 * u, base + t1 * u]).intersection(region)
            if clipped.is_empty:
                continue
            pts = np.array([c for g in getattr(clipped, "geoms", [clipped]) for c in g.coords])
            tt = pts @ u
            t0, t1 = float(tt.min()), float(tt.max())
        if t1 - t0 <= LENGTH_EPS:
            continue
        a, b = base + t0 * u, base + t1 * u
        out.append(SweepEdge(Segment2((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))), area, cid, cl.direction))
    return out
