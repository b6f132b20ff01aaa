"""Per-edge roof profiles: slice across each footprint edge, climb the slice,
merge the stations into one monotone wall-then-pitches polyline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import shapely
from scipy.optimize import isotonic_regression
from shapely.geometry import LineString

from .geometry import Polygon2, TriMesh, heights_at, slice_segments_vertical
from .sweep import douglas_peucker

QUALITIES = ("simple", "moderate", "high")
QUALITY_TOL = {"moderate": 0.5, "high": 0.05}
HEIGHT_STEP = 0.1
WALL_OFFSET_TOL = 0.15
FLAT_SLOPE = math.tan(math.radians(10))
# climbing over a noisy flat roof ends a few sigma above the eave
CROWN_MIN_RISE = 0.25


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Polyline of (inward offset, height) pairs starting at (0, 0).

    Heights strictly increase and offsets never decrease. The last segment
    is taken to continue upward past the final point.
    """

    points: tuple[tuple[float, float], ...]
    quality: str = "high"

    def __post_init__(self):
        pts = tuple((float(o), float(h)) for o, h in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ProfileError("a profile needs at least two points")
        if pts[0] != (0.0, 0.0):
            raise ProfileError("a profile starts at (0, 0)")
        for (o0, h0), (o1, h1) in zip(pts, pts[1:]):
            if not h1 > h0:
                raise ProfileError("profile heights must strictly increase")
            if o1 < o0:
                raise ProfileError("profile offsets must not decrease")
        if self.quality not in QUALITIES:
            raise ProfileError(f"unknown quality {self.quality!r}")

    @classmethod
    def vertical(cls, height: float, quality: str = "high") -> Profile:
        return cls(((0.0, 0.0), (0.0, height)), quality)

    @classmethod
    def pitched(cls, wall: float, pitches: Sequence[tuple[float, float]], quality: str = "high") -> Profile:
        """Wall of height ``wall`` followed by ``(run, rise)`` pitches."""
        pts = [(0.0, 0.0)]
        if wall > 0:
            pts.append((0.0, wall))
        o, h = 0.0, wall
        for run, rise in pitches:
            o, h = o + run, h + rise
            pts.append((o, h))
        return cls(tuple(pts), quality)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def heights(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def top(self) -> float:
        return self.points[-1][1]

    @property
    def wall_height(self) -> float:
        """Height of the initial vertical run."""
        w = 0.0
        for o, h in self.points[1:]:
            if o > 0:
                break
            w = h
        return w

    def breaks(self) -> list[float]:
        """Heights where the active segment changes."""
        return [h for _, h in self.points[1:-1]]

    def segment_at(self, h: float) -> int:
        hs = self.heights
        k = int(np.searchsorted(hs, h, side="right")) - 1
        return min(max(k, 0), len(hs) - 2)

    def speed_at(self, h: float) -> float:
        """Inward speed (offset per unit height) of the segment active at ``h``."""
        k = self.segment_at(h)
        (o0, h0), (o1, h1) = self.points[k], self.points[k + 1]
        return (o1 - o0) / (h1 - h0)

    def offset_at(self, h: float) -> float:
        k = self.segment_at(h)
        (o0, h0) = self.points[k]
        return o0 + self.speed_at(h) * (h - h0)


@dataclass(frozen=True)
class NoisyProfile:
    """One station's climbed polyline in slice coordinates."""

    station: tuple[float, float]
    points: np.ndarray  # (n, 2) offset, height; empty when the slice missed the mesh

    @property
    def empty(self) -> bool:
        return len(self.points) == 0


def _densify(segs: np.ndarray, step: float) -> np.ndarray:
    if len(segs) == 0:
        return np.zeros((0, 2))
    out = [segs[:, 0], segs[:, 1]]
    lengths = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
    for s, L in zip(segs, lengths):
        n = int(L / step)
        if n > 1:
            t = np.arange(1, n)[:, None] / n
            out.append(s[0] + t * (s[1] - s[0]))
    return np.vstack(out)


def _climb(
    pts: np.ndarray,
    start_window: tuple[float, float] = (-1.0, 1.5),
    back: float = 0.25,
    ahead: float = 1.5,
    rise: float = 0.05,
) -> np.ndarray:
    """Walk from the station up through ever higher slice points.

    Each step takes the nearest point at least ``rise`` higher, no more than
    ``back`` behind and ``ahead`` in front of the current offset. The walk
    ends when there is no such point.
    """
    w = (pts[:, 0] >= start_window[0]) & (pts[:, 0] <= start_window[1])
    if not w.any():
        return np.zeros((0, 2))
    cand = pts[w]
    cur = cand[int(np.argmin(np.hypot(cand[:, 0], cand[:, 1])))]
    path = [cur]
    while True:
        m = (pts[:, 1] >= cur[1] + rise) & (pts[:, 0] >= cur[0] - back) & (pts[:, 0] <= cur[0] + ahead)
        if not m.any():
            break
        cand = pts[m]
        cur = cand[int(np.argmin(np.hypot(cand[:, 0] - cur[0], cand[:, 1] - cur[1])))]
        path.append(cur)
    # the last stretch can be shorter than ``rise``; finish on the top point
    m = (pts[:, 1] > cur[1]) & (pts[:, 0] >= cur[0] - back) & (pts[:, 0] <= cur[0] + ahead)
    if m.any():
        cand = pts[m]
        path.append(cand[int(np.argmax(cand[:, 1]))])
    return np.array(path)


def _exit_distance(footprint: Polygon2, p: np.ndarray, n: np.ndarray) -> float:
    ray = LineString([p - 1e-6 * n, p + (footprint.diameter() + 1.0) * n])
    hit = ray.intersection(footprint.shape)
    if hit.is_empty:
        return 0.0
    parts = getattr(hit, "geoms", [hit])
    near = min(parts, key=lambda g: g.distance(ray.interpolate(0)))
    return max(float(np.dot(np.asarray(c) - p, n)) for c in near.coords)


def interior_max_height(mesh: TriMesh, footprint: Polygon2, step: float = 0.5) -> float:
    """Highest mesh point over a grid inside the footprint (0 if uncovered)."""
    x0, y0, x1, y1 = footprint.bbox()
    xs = np.arange(x0 + step / 2, x1, step)
    ys = np.arange(y0 + step / 2, y1, step)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    if len(pts):
        pts = pts[shapely.contains_xy(footprint.shape, pts[:, 0], pts[:, 1])]
    if len(pts) == 0:
        pts = np.array([footprint.shape.representative_point().coords[0]])
    h = heights_at(mesh, pts)
    return float(np.nanmax(h)) if np.isfinite(h).any() else 0.0


def extract_noisy_profiles(
    mesh: TriMesh,
    a,
    b,
    spacing: float = 1.0,
    footprint: Polygon2 | None = None,
    h_limit: float | None = None,
    sample_step: float = 0.1,
) -> list[NoisyProfile]:
    """Climb vertical slices taken across the edge ``a -> b``.

    The interior is on the left of the edge. With a ``footprint`` the slice is
    cut where the inward ray leaves it; ``h_limit`` drops points above it (the
    pipeline passes the footprint's own highest point so a climb cannot
    continue onto a taller neighbour).
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    a, b = np.asarray(a, float), np.asarray(b, float)
    L = float(np.linalg.norm(b - a))
    if L == 0:
        raise ValueError("degenerate edge")
    u = (b - a) / L
    n = np.array([-u[1], u[0]])
    k = max(1, int(math.floor(L / spacing)))
    out = []
    for t in (np.arange(k) + 0.5) * (L / k):
        p = a + t * u
        pts = _densify(slice_segments_vertical(mesh, p, n), sample_step)
        if footprint is not None and len(pts):
            pts = pts[pts[:, 0] <= _exit_distance(footprint, p, n) + 0.25]
        if h_limit is not None and len(pts):
            pts = pts[pts[:, 1] <= h_limit]
        path = _climb(pts) if len(pts) else np.zeros((0, 2))
        out.append(NoisyProfile((float(p[0]), float(p[1])), path))
    return out


def _normalise(path: np.ndarray) -> np.ndarray:
    """Anchor a climbed path at its first offset and extend it to the ground.
    Negative offsets are clamped; overhangs are removed after merging."""
    o = np.maximum(path[:, 0] - path[0, 0], 0.0)
    h = path[:, 1]
    if h[0] > 0:
        o = np.concatenate([[0.0], o])
        h = np.concatenate([[0.0], h])
    keep = np.concatenate([[True], np.diff(h) > 1e-9])
    return np.column_stack([o[keep], h[keep]])


def merge_clean_profile(noisy: Sequence[NoisyProfile], quality: str = "high") -> Profile:
    """Median-merge station polylines into one profile under the wall prior.

    Each station is resampled every 0.1 m of height; the offset at a level is
    the median over stations that reach it. The wall is the run from the
    ground whose median offset stays below 0.15 m. Near-flat segments at the
    top, and shallow crowns rising less than ``CROWN_MIN_RISE``, are dropped:
    flat roofs come from the height cap instead.
    """
    paths = [_normalise(p.points) for p in noisy if not p.empty]
    paths = [p for p in paths if p[-1, 1] > 0]
    if not paths:
        raise ProfileError("no station reached the mesh")
    tops = np.array([p[-1, 1] for p in paths])
    top = float(np.median(tops))
    levels = np.arange(0.0, top, HEIGHT_STEP)
    levels = np.append(levels[levels < top - 1e-9], top)
    offs = np.empty(len(levels))
    for i, h in enumerate(levels):
        vals = [np.interp(h, p[:, 1], p[:, 0]) for p in paths if p[-1, 1] >= h - 1e-9]
        offs[i] = np.median(vals) if vals else offs[i - 1]
    offs = np.maximum(isotonic_regression(offs).x, 0.0)
    n_wall = int(np.argmax(offs >= WALL_OFFSET_TOL)) if (offs >= WALL_OFFSET_TOL).any() else len(levels)
    if n_wall == len(levels):
        return Profile.vertical(top, quality)
    wall = float(levels[n_wall - 1]) if n_wall > 0 else 0.0
    # refine the eave by running the first metre of roof back to offset 0
    hs, os_ = levels[n_wall : n_wall + 10], offs[n_wall : n_wall + 10]
    if len(hs) >= 2 and np.ptp(os_) > 1e-9:
        s, c = np.polyfit(hs, os_, 1)
        if s > 0:
            wall = float(np.clip(-c / s, max(wall - HEIGHT_STEP, 0.0), levels[n_wall] - 1e-6))
    pts = [(0.0, 0.0)] + ([(0.0, wall)] if wall > 0 else [])
    pts += [(float(o), float(h)) for o, h in zip(offs[n_wall:], levels[n_wall:]) if h > wall + 1e-9]
    # drop a near-flat crown (noise wandering over a flat roof)
    while len(pts) > 2:
        (o0, h0), (o1, h1) = pts[-2], pts[-1]
        if o1 - o0 > 1e-9 and (h1 - h0) / (o1 - o0) < FLAT_SLOPE:
            pts.pop()
        else:
            break
    # so is a shallow crown (under 45 degrees) that barely rises
    j = len(pts) - 1
    while j > 1 and pts[j][0] - pts[j - 1][0] > 1e-9 and (pts[j][1] - pts[j - 1][1]) / (pts[j][0] - pts[j - 1][0]) < 1.0:
        j -= 1
    if j < len(pts) - 1 and pts[-1][1] - pts[j][1] < CROWN_MIN_RISE:
        del pts[j + 1 :]
    return simplify_profile(Profile(tuple(pts), quality), quality)


def simplify_profile(p: Profile, quality: str) -> Profile:
    """Reduce a profile to the given quality level.

    ``simple`` keeps one vertical line to the top; ``moderate`` and ``high``
    run Douglas-Peucker (0.5 m and 0.05 m) over the part above the wall.
    """
    if quality not in QUALITIES:
        raise ProfileError(f"unknown quality {quality!r}")
    if quality == "simple":
        return Profile.vertical(p.top, quality)
    pts = np.array(p.points)
    w = p.wall_height
    k = int(np.searchsorted(pts[:, 1], w)) if w > 0 else 0
    upper = douglas_peucker(pts[k:], QUALITY_TOL[quality])
    # collinear interior points go even when the tolerance would allow them
    if len(upper) > 2:
        keep = [0]
        for i in range(1, len(upper) - 1):
            a, b, c = upper[keep[-1]], upper[i], upper[i + 1]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if abs(cross) > 1e-9 * max(1.0, np.hypot(*(c - a))):
                keep.append(i)
        keep.append(len(upper) - 1)
        upper = upper[keep]
    out = [tuple(q) for q in pts[:k]] + [tuple(q) for q in upper]
    return Profile(tuple(out), quality)


def fit_edge_profile(
    mesh: TriMesh,
    a,
    b,
    footprint: Polygon2,
    quality: str = "high",
    spacing: float = 1.0,
    h_limit: float | None = None,
    fallback_height: float | None = None,
) -> Profile:
    """Noisy profiles, merge and simplify for one edge; vertical fallback when
    the mesh is missing along the whole edge."""
    noisy = extract_noisy_profiles(mesh, a, b, spacing, footprint, h_limit)
    try:
        return merge_clean_profile(noisy, quality)
    except ProfileError:
        h = fallback_height if fallback_height is not None else (h_limit or mesh.max_height)
        return Profile.vertical(max(h, 0.1), quality)
