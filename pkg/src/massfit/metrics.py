"""Comparing reconstructions with their input: error grids, IoU, drainage."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from shapely.geometry import Polygon

from .extrusion import MassModel
from .geometry import Polygon2, TriMesh, heights_at

STATS_HEADER = ("name", "sweep_edges", "variables", "time_sec", "error_m2")


# ---------------------------------------------------------------- error grid


@dataclass
class ErrorGrid:
    """Squared vertical error per cell; row 0 is the southmost row."""

    origin: tuple[float, float]
    cell: float
    errors: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.errors.shape

    def centers(self) -> np.ndarray:
        rows, cols = self.shape
        xs = self.origin[0] + (np.arange(cols) + 0.5) * self.cell
        ys = self.origin[1] + (np.arange(rows) + 0.5) * self.cell
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy], axis=-1)


def _as_mesh(model) -> TriMesh:
    if isinstance(model, MassModel):
        return model.mesh
    if isinstance(model, TriMesh):
        return model
    return TriMesh.concatenate([_as_mesh(m) for m in model])


def error_grid(input_mesh: TriMesh, model, cell: float = 0.25) -> ErrorGrid:
    """Per-cell squared height difference between ``input_mesh`` and ``model``.

    ``model`` may be a MassModel, a TriMesh or a sequence of either. The grid
    covers both bounding boxes, dilated by one cell, with its origin on a
    multiple of ``cell``; a cell is valid when both surfaces cover its center.
    """
    if not cell > 0:
        raise ValueError("cell size must be positive")
    other = _as_mesh(model)
    boxes = [m.bounds for m in (input_mesh, other) if not m.is_empty]
    if not boxes:
        raise ValueError("both meshes are empty")
    # cells sit on a lattice anchored at the coordinate origin, so every
    # model compared against the same input is sampled at the same points
    lo = np.floor((np.min([b[0][:2] for b in boxes], axis=0) - cell) / cell) * cell
    hi = np.max([b[1][:2] for b in boxes], axis=0) + cell
    cols = max(1, int(math.ceil((hi[0] - lo[0]) / cell - 1e-9)))
    rows = max(1, int(math.ceil((hi[1] - lo[1]) / cell - 1e-9)))
    grid = ErrorGrid((float(lo[0]), float(lo[1])), float(cell), np.zeros((rows, cols)), np.zeros((rows, cols), bool))
    pts = grid.centers().reshape(-1, 2)
    a = heights_at(input_mesh, pts) if not input_mesh.is_empty else np.full(len(pts), np.nan)
    b = heights_at(other, pts) if not other.is_empty else np.full(len(pts), np.nan)
    valid = np.isfinite(a) & np.isfinite(b)
    err = np.where(valid, (np.nan_to_num(a) - np.nan_to_num(b)) ** 2, 0.0)
    grid.errors = err.reshape(rows, cols)
    grid.valid = valid.reshape(rows, cols)
    return grid


def mse(grid: ErrorGrid) -> float:
    """Mean of the valid cells (exactly rounded, so traversal order is irrelevant)."""
    vals = grid.errors[grid.valid]
    if len(vals) == 0:
        raise ValueError("error grid has no valid cells")
    return math.fsum(vals.tolist()) / len(vals)


def grid_csv(grid: ErrorGrid) -> str:
    rows, cols = grid.shape
    out = [
        f"# origin_x={grid.origin[0]:.6f},origin_y={grid.origin[1]:.6f},cell={grid.cell:.6f},rows={rows},cols={cols}",
        "# row 0 is the lowest y; empty fields are cells without data",
    ]
    for r in range(rows):
        out.append(",".join(f"{e:.6f}" if v else "" for e, v in zip(grid.errors[r], grid.valid[r])))
    return "\n".join(out) + "\n"


def grid_pgm(grid: ErrorGrid) -> bytes:
    """Binary 8-bit PGM, north up; black is zero error or no data, white the worst cell."""
    rows, cols = grid.shape
    top = float(grid.errors[grid.valid].max()) if grid.valid.any() else 0.0
    scaled = np.zeros((rows, cols))
    if top > 0:
        scaled = np.where(grid.valid, grid.errors / top, 0.0)
    img = np.round(scaled * 255).astype(np.uint8)[::-1]
    return f"P5\n{cols} {rows}\n255\n".encode() + img.tobytes()


# ---------------------------------------------------------------- segmentation IoU


@dataclass
class IoUResult:
    mean_iou: float
    matches: list[tuple[int, int, float]]
    unmatched: int

    def __float__(self) -> float:
        return self.mean_iou


def _shape(f) -> Polygon:
    if isinstance(f, Polygon):
        return f
    if isinstance(f, Polygon2):
        return f.shape
    return f.polygon.shape


def segmentation_iou(predicted: Sequence, truth: Sequence) -> IoUResult:
    """Greedy matching, largest predicted footprint first, to the unmatched
    truth footprint of highest IoU. ``unmatched`` counts footprints of
    either set left without a partner."""
    P = [_shape(p) for p in predicted]
    T = [_shape(t) for t in truth]
    order = sorted(range(len(P)), key=lambda i: (-P[i].area, i))
    free = set(range(len(T)))
    matches = []
    for i in order:
        best, best_j = 0.0, None
        for j in sorted(free):
            inter = P[i].intersection(T[j]).area
            if inter <= 0:
                continue
            iou = inter / P[i].union(T[j]).area
            if iou > best:
                best, best_j = iou, j
        if best_j is not None:
            free.discard(best_j)
            matches.append((i, best_j, best))
    mean = math.fsum(m[2] for m in matches) / len(matches) if matches else 0.0
    unmatched = (len(P) - len(matches)) + len(free)
    return IoUResult(mean, matches, unmatched)


# ---------------------------------------------------------------- raindrops


@dataclass
class RaindropResult:
    passed: bool
    n: int
    failure: np.ndarray | None = None
    reason: str = ""
    path_lengths: list[float] = field(default_factory=list, repr=False)

    def __bool__(self) -> bool:
        return self.passed


class _Surface:
    """Triangle adjacency and per-face downhill directions."""

    def __init__(self, model: MassModel):
        self.V = model.mesh.vertices
        self.T = model.mesh.triangles
        self.labels = np.asarray(model.labels)
        self.edge_faces: dict[tuple[int, int], list[int]] = {}
        for f, t in enumerate(self.T):
            for k in range(3):
                a, b = int(t[k]), int(t[(k + 1) % 3])
                self.edge_faces.setdefault((min(a, b), max(a, b)), []).append(f)
        self.vert_faces: dict[int, list[int]] = {}
        for f, t in enumerate(self.T):
            for v in t:
                self.vert_faces.setdefault(int(v), []).append(f)
        c = self.V[self.T]
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        self.normal = n / np.linalg.norm(n, axis=1, keepdims=True)
        # steepest descent in the face plane: -z with its normal part removed
        g = np.array([0.0, 0.0, -1.0]) + self.normal[:, 2:3] * self.normal
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        self.down = np.where(norm > 1e-12, g / np.where(norm > 0, norm, 1), 0.0)

    def is_roof(self, f: int) -> bool:
        return self.labels[f] == "roof"

    def neighbour(self, f: int, a: int, b: int) -> int | None:
        fs = self.edge_faces.get((min(a, b), max(a, b)), [])
        others = [g for g in fs if g != f]
        return others[0] if len(others) == 1 else None

    def is_gutter(self, a: int, b: int) -> bool:
        """Horizontal edge where a roof face meets a wall or floor lying below it."""
        pa, pb = self.V[a], self.V[b]
        if abs(pa[2] - pb[2]) > 1e-6:
            return False
        fs = self.edge_faces.get((min(a, b), max(a, b)), [])
        roofs = [f for f in fs if self.is_roof(f)]
        walls = [f for f in fs if self.labels[f] in ("wall", "floor")]
        if not roofs or not walls:
            return False
        for w in walls:
            if self.labels[w] == "floor":
                # a profile with no wall drains straight onto the ground line
                return True
            third = [v for v in self.T[w] if v not in (a, b)]
            if third and self.V[third[0]][2] < pa[2] - 1e-9:
                return True
        return False

    def enters(self, f: int, p: np.ndarray, d: np.ndarray) -> bool:
        """Does direction ``d`` from ``p`` (on the boundary of ``f``) go into ``f``?"""
        t = self.T[f]
        n = self.normal[f]
        if abs(d @ n) > 1e-9:
            return False
        for k in range(3):
            a, b = self.V[t[k]], self.V[t[(k + 1) % 3]]
            # inward side of edge (a, b) in the face plane
            inward = np.cross(n, b - a)
            if np.linalg.norm(np.cross(p - a, b - a)) < 1e-9 * max(1.0, np.linalg.norm(b - a)):
                if d @ inward < -1e-12:
                    return False
        return True


def raindrop_check(model: MassModel, n: int = 100, seed: int = 0, max_steps: int = 10_000) -> RaindropResult:
    """Drop ``n`` seeded random points on the roof and let them run downhill.

    Each drop follows the steepest descent across faces, sliding along
    valleys where both sides drain into an edge. It passes when it reaches a
    gutter (a horizontal roof edge above a wall or floor) within ten
    footprint diameters of travel; a drop that comes to rest anywhere else
    is a pit and fails the check.
    """
    s = _Surface(model)
    roofs = np.nonzero(s.labels == "roof")[0]
    if len(roofs) == 0:
        return RaindropResult(True, 0, reason="no roof faces")
    limit = 10.0 * model.footprint.diameter()
    rng = np.random.default_rng(seed)
    c = s.V[s.T[roofs]]
    area = 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
    picks = rng.choice(len(roofs), size=n, p=area / area.sum())
    lengths = []
    for k in range(n):
        f = int(roofs[picks[k]])
        r = rng.random(2)
        if r.sum() > 1:
            r = 1 - r
        p = s.V[s.T[f][0]] + r[0] * (s.V[s.T[f][1]] - s.V[s.T[f][0]]) + r[1] * (s.V[s.T[f][2]] - s.V[s.T[f][0]])
        ok, where, length, why = _descend(s, f, p, limit, max_steps)
        lengths.append(length)
        if not ok:
            return RaindropResult(False, n, where, why, lengths)
    return RaindropResult(True, n, None, "", lengths)


def _descend(s: _Surface, f: int, p: np.ndarray, limit: float, max_steps: int):
    """Follow one drop. State is either inside face ``f`` or at a vertex."""
    travelled = 0.0
    vertex = None
    for _ in range(max_steps):
        if travelled > limit:
            return False, p, travelled, "path too long"
        if vertex is not None:
            step = _leave_vertex(s, vertex)
            if step == "gutter":
                return True, p, travelled, ""
            if step is None:
                return False, p, travelled, "pit at a vertex"
            kind, target = step
            if kind == "edge":
                a, b = target
                travelled += float(np.linalg.norm(s.V[b] - p))
                p = s.V[b].copy()
                if s.is_gutter(a, b):
                    return True, p, travelled, ""
                vertex = b
                continue
            f, vertex = target, None
        q, exit_edge, hit_vertex = _trace(s, f, p)
        if q is None:
            return False, p, travelled, "flat or upward face"
        travelled += float(np.linalg.norm(q - p))
        p = q
        if hit_vertex is not None:
            vertex = hit_vertex
            if any(s.is_gutter(hit_vertex, w) for w in _vertex_nbrs(s, hit_vertex)):
                return True, p, travelled, ""
            continue
        a, b = exit_edge
        if s.is_gutter(a, b):
            return True, p, travelled, ""
        g = s.neighbour(f, a, b)
        if g is not None and s.is_roof(g) and s.enters(g, p, s.down[g]):
            f = g
            continue
        # both sides drain into this edge (a valley) or the far side is a
        # rising wall: slide down the edge to its lower end
        lo, hi = (a, b) if s.V[a][2] < s.V[b][2] else (b, a)
        if s.V[hi][2] - s.V[lo][2] < 1e-9:
            return False, p, travelled, "pit on a level edge"
        travelled += float(np.linalg.norm(s.V[lo] - p))
        p = s.V[lo].copy()
        if s.is_gutter(a, b):
            return True, p, travelled, ""
        vertex = lo
    return False, p, travelled, "step limit"


def _vertex_nbrs(s: _Surface, v: int) -> set[int]:
    out = set()
    for f in s.vert_faces.get(v, []):
        out.update(int(w) for w in s.T[f] if w != v)
    return out


def _trace(s: _Surface, f: int, p: np.ndarray):
    """Walk from ``p`` along the descent of ``f`` to the face boundary.

    Returns the exit point and either the exit edge or the vertex hit.
    """
    d = s.down[f]
    if np.linalg.norm(d) < 1e-12:
        return None, None, None
    t = s.T[f]
    n = s.normal[f]
    best, best_k = math.inf, None
    for k in range(3):
        a, b = s.V[t[k]], s.V[t[(k + 1) % 3]]
        inward = np.cross(n, b - a)
        den = d @ inward
        if den >= -1e-9 * np.linalg.norm(inward):
            continue
        tt = ((a - p) @ inward) / den
        if tt < best:
            best, best_k = max(tt, 0.0), k
    if best_k is None:
        return None, None, None
    q = p + best * d
    a, b = int(t[best_k]), int(t[(best_k + 1) % 3])
    L = np.linalg.norm(s.V[b] - s.V[a])
    for v in (a, b):
        if np.linalg.norm(q - s.V[v]) < 1e-9 * max(1.0, L):
            return s.V[v].copy(), None, v
    return q, (a, b), None


def _leave_vertex(s: _Surface, v: int):
    """Pick how a drop resting on vertex ``v`` continues downhill."""
    if any(s.is_gutter(v, w) for w in _vertex_nbrs(s, v)):
        return "gutter"
    p = s.V[v]
    best, choice = 0.0, None
    for f in s.vert_faces.get(v, []):
        if not s.is_roof(f):
            continue
        d = s.down[f]
        if np.linalg.norm(d) < 1e-12:
            continue
        # the descent must point into the face's corner at v
        t = [int(w) for w in s.T[f]]
        k = t.index(v)
        e1 = s.V[t[(k + 1) % 3]] - p
        e2 = s.V[t[(k + 2) % 3]] - p
        n = s.normal[f]
        if np.cross(e1, d) @ n >= -1e-12 and np.cross(d, e2) @ n >= -1e-12:
            slope = -d[2]
            if slope > best + 1e-12:
                best, choice = slope, ("face", f)
    for w in sorted(_vertex_nbrs(s, v)):
        e = s.V[w] - p
        L = np.linalg.norm(e)
        if L < 1e-12:
            continue
        fs = s.edge_faces.get((min(v, w), max(v, w)), [])
        if not any(s.is_roof(f) for f in fs):
            continue
        slope = -e[2] / L
        if slope > best + 1e-12:
            best, choice = slope, ("edge", (v, w))
    return choice


# ---------------------------------------------------------------- run statistics


@dataclass
class RunStats:
    name: str
    sweep_edges: int
    variables: int
    time_sec: float
    error_m2: float

    def __post_init__(self):
        if min(self.sweep_edges, self.variables) < 0 or self.time_sec < 0 or self.error_m2 < 0:
            raise ValueError("run statistics are non-negative")

    def row(self) -> list[str]:
        return [self.name, str(self.sweep_edges), str(self.variables), f"{self.time_sec:.4f}", f"{self.error_m2:.6f}"]


def stats_csv(rows: Sequence[RunStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()


def read_stats_csv(path) -> list[RunStats]:
    with open(Path(path), newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != STATS_HEADER:
            raise ValueError(f"{path}: not a statistics file")
        return [
            RunStats(r["name"], int(r["sweep_edges"]), int(r["variables"]), float(r["time_sec"]), float(r["error_m2"]))
            for r in rd
        ]
