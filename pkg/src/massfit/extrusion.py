"""Procedural extrusion of a footprint along per-edge profiles.

The footprint's edges are swept upward as a weighted straight skeleton: at
height h each edge line moves inward at the slope of its profile segment
active at h. The wavefront is advanced from event to event (edge collapse,
vertex/edge contact, profile break); every slab between two events emits one
planar quad per wavefront edge. Topology changes are resolved at each event
by a small set of local rewrites, and the slab quads are stitched into a
closed triangle mesh at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from shapely.geometry import Polygon as ShapelyPolygon

from .geometry import Polygon2, TriMesh, signed_area, triangulate_planar_face, triangulate_polygon
from .profiles import Profile

POS_TOL = 1e-6
DT_MERGE = 1e-7
RATE_TOL = 1e-9
RING_AREA_TOL = 1e-10
PARALLEL_TOL = 1e-6
MAX_EVENTS = 20000

FLOOR = -1
CAP = -2
LABELS = ("wall", "roof", "floor", "cap")


class ExtrusionError(RuntimeError):
    """Raised when the wavefront cannot be resolved; carries the location."""

    def __init__(self, msg: str, location=None):
        super().__init__(msg if location is None else f"{msg} near {tuple(round(float(c), 6) for c in location)}")
        self.location = location


@dataclass
class MassModel:
    """Closed, labeled building mesh with per-triangle provenance.

    ``edge_ids`` holds the footprint edge each triangle was swept from
    (``FLOOR``/``CAP`` for horizontal closures); ``segments`` the profile
    segment index (-1 where not applicable).
    """

    mesh: TriMesh
    labels: np.ndarray
    edge_ids: np.ndarray
    segments: np.ndarray
    footprint: Polygon2
    footprint_id: int = 0
    profiles: Mapping[int, Profile] = field(default_factory=dict)
    top: float = 0.0

    @property
    def n_triangles(self) -> int:
        return len(self.mesh.triangles)

    def face_keys(self) -> list[tuple[str, int, int]]:
        """Distinct planar faces as ``(label, edge id, segment)``."""
        return sorted(set(zip(self.labels.tolist(), self.edge_ids.tolist(), self.segments.tolist())), key=str)

    def face_count(self, label: str) -> int:
        return sum(1 for k in self.face_keys() if k[0] == label)

    def volume(self) -> float:
        c = self.mesh.corners
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


def height_cap_from_mesh(mesh: TriMesh, margin: float = 0.5) -> float:
    """Maximum extrusion height: highest mesh vertex plus ``margin``."""
    if mesh.is_empty:
        raise ValueError("cannot take a height cap from an empty mesh")
    return mesh.max_height + margin


# --------------------------------------------------------------------------
# wavefront state


@dataclass
class _Edge:
    src: int
    u: np.ndarray
    step: bool = False

    @property
    def n(self) -> np.ndarray:
        return np.array([-self.u[1], self.u[0]])


@dataclass
class _Node:
    p: np.ndarray
    vid: int
    e: _Edge  # outgoing edge


class _UnionFind:
    def __init__(self):
        self.parent: list[int] = []

    def add(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the older vertex as representative
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _ring_area(ring: list[_Node]) -> float:
    return signed_area(np.array([n.p for n in ring])) if len(ring) >= 3 else 0.0


class _Wavefront:
    def __init__(self, footprint: Polygon2, profiles: Mapping[int, Profile]):
        self.profiles = profiles
        self.V: list[np.ndarray] = []
        self.uf = _UnionFind()
        self.faces: list[tuple[list[list[int]], str, int, int]] = []
        self.rings: list[list[_Node]] = []
        self.H = 0.0
        self.floor_rings: list[list[int]] = []
        eid = 0
        for ring in footprint.rings:
            nodes = []
            m = len(ring)
            for i in range(m):
                a, b = ring[i], ring[(i + 1) % m]
                d = b - a
                nodes.append(_Node(np.array(a, float), self._vertex(a, 0.0), _Edge(eid, d / np.linalg.norm(d))))
                eid += 1
            self.floor_rings.append([n.vid for n in nodes])
            self.rings.append(nodes)

    def _vertex(self, p, z: float) -> int:
        self.V.append(np.array([p[0], p[1], z], float))
        return self.uf.add()

    def speed(self, e: _Edge, h: float) -> float:
        return 0.0 if e.step else self.profiles[e.src].speed_at(h)

    # ---------------------------------------------------------------- velocity

    def _velocity(self, ea: _Edge, eb: _Edge, h: float, where) -> np.ndarray:
        na, nb = ea.n, eb.n
        sa, sb = self.speed(ea, h), self.speed(eb, h)
        det = na[0] * nb[1] - na[1] * nb[0]
        if abs(det) < PARALLEL_TOL:
            if na @ nb > 0 and abs(sa - sb) < 1e-12:
                return sa * na
            raise ExtrusionError("parallel wavefront edges with no resolvable vertex motion", where)
        # solve [na; nb] v = [sa; sb]
        return np.array([(sa * nb[1] - sb * na[1]) / det, (na[0] * sb - nb[0] * sa) / det])

    def velocities(self) -> list[np.ndarray]:
        out = []
        for ring in self.rings:
            m = len(ring)
            out.append(np.array([self._velocity(ring[i - 1].e, ring[i].e, self.H, ring[i].p) for i in range(m)]))
        return out

    # ---------------------------------------------------------------- events

    def next_event(self, vel: list[np.ndarray]) -> float:
        best = math.inf
        P = [np.array([n.p for n in r]) for r in self.rings]
        U = [np.array([n.e.u for n in r]) for r in self.rings]
        for r, ring in enumerate(self.rings):
            p, v, u = P[r], vel[r], U[r]
            dp = np.roll(p, -1, axis=0) - p
            dv = np.roll(v, -1, axis=0) - v
            L = np.einsum("ij,ij->i", dp, u)
            rate = np.einsum("ij,ij->i", dv, u)
            shrink = rate < -RATE_TOL
            if shrink.any():
                best = min(best, float((np.maximum(L[shrink], 0.0) / -rate[shrink]).min()))
        allp = np.vstack(P)
        allv = np.vstack(vel)
        for r, ring in enumerate(self.rings):
            p, u = P[r], U[r]
            n = np.column_stack([-u[:, 1], u[:, 0]])
            s = np.array([self.speed(nd.e, self.H) for nd in ring])
            q = np.roll(p, -1, axis=0)
            qv = np.roll(vel[r], -1, axis=0)
            # signed distance of every vertex to every edge line of this ring, and its rate
            f0 = (allp @ n.T) - np.einsum("ij,ij->i", p, n)[None, :]
            rate = (allv @ n.T) - s[None, :]
            cand = (f0 > -POS_TOL) & (rate < -RATE_TOL)
            if not cand.any():
                continue
            ks, js = np.nonzero(cand)
            t = np.maximum(f0[ks, js], 0.0) / -rate[ks, js]
            order = np.argsort(t)
            off = sum(len(x) for x in self.rings[:r])
            for idx in order:
                if t[idx] >= best:
                    break
                k, j = ks[idx], js[idx]
                if off <= k < off + len(ring) and (k - off == j or k - off == (j + 1) % len(ring)):
                    continue
                # coincident points were already resolved by the cleanup
                if min(np.linalg.norm(allp[k] - p[j]), np.linalg.norm(allp[k] - q[j])) < POS_TOL:
                    continue
                tt = t[idx]
                a = p[j] + vel[r][j] * tt
                b = q[j] + qv[j] * tt
                x = allp[k] + allv[k] * tt
                d = b - a
                L2 = float(d @ d)
                if L2 < POS_TOL * POS_TOL:
                    # a point-like edge is only hit by a vertex reaching it
                    hit = np.linalg.norm(x - a) < POS_TOL
                else:
                    w = float((x - a) @ d) / L2
                    tol = POS_TOL / math.sqrt(L2)
                    hit = -tol <= w <= 1 + tol
                if hit:
                    best = tt
                    break
        return self.H + best

    # ---------------------------------------------------------------- slab

    def advance(self, h: float, vel: list[np.ndarray]):
        dt = h - self.H
        if dt < DT_MERGE:
            for ring, v in zip(self.rings, vel):
                for nd, vv in zip(ring, v):
                    nd.p = nd.p + vv * dt
            self.H = h
            return
        mid = 0.5 * (self.H + h)
        for ring, v in zip(self.rings, vel):
            bottom = [nd.vid for nd in ring]
            for nd, vv in zip(ring, v):
                nd.p = nd.p + vv * dt
                nd.vid = self._vertex(nd.p, h)
            m = len(ring)
            for i in range(m):
                j = (i + 1) % m
                e = ring[i].e
                if e.step:
                    label, seg = "wall", -1
                else:
                    prof = self.profiles[e.src]
                    seg = prof.segment_at(mid)
                    label = "wall" if abs(prof.speed_at(mid)) == 0 else "roof"
                quad = [bottom[i], bottom[j], ring[j].vid, ring[i].vid]
                self.faces.append(([quad], label, e.src, seg))
        self.H = h

    # ---------------------------------------------------------------- cleanup

    def _merge_close(self) -> bool:
        changed = False
        for ring in self.rings:
            i = 0
            while len(ring) >= 2 and i < len(ring):
                j = (i + 1) % len(ring)
                if np.linalg.norm(ring[j].p - ring[i].p) < POS_TOL:
                    self.uf.union(ring[i].vid, ring[j].vid)
                    ring[j].vid = self.uf.find(ring[j].vid)
                    del ring[i]
                    changed = True
                    i = max(i - 1, 0)
                else:
                    i += 1
        return changed

    def _drop_degenerate(self) -> bool:
        keep, gone = [], []
        for r in self.rings:
            (keep if len(r) >= 3 and abs(_ring_area(r)) > RING_AREA_TOL else gone).append(r)
        for r in gone:
            # a flattened ring (ridge lines) may revisit a point under different ids
            for i in range(len(r)):
                for j in range(i + 1, len(r)):
                    if np.linalg.norm(r[i].p - r[j].p) < POS_TOL:
                        self.uf.union(r[i].vid, r[j].vid)
        changed = len(keep) != len(self.rings)
        self.rings = keep
        return changed

    def _remove_spike(self) -> bool:
        for ring in self.rings:
            m = len(ring)
            for i in range(m):
                prev, cur = ring[i - 1], ring[i]
                if prev.e.u @ cur.e.u < -1 + 1e-9:
                    nxt = ring[(i + 1) % m]
                    l_in = np.linalg.norm(cur.p - prev.p)
                    l_out = np.linalg.norm(nxt.p - cur.p)
                    # a sliver rather than a true spike: close it with a flat piece
                    d_in, d_out = cur.p - prev.p, nxt.p - cur.p
                    width = abs(d_in[0] * d_out[1] - d_in[1] * d_out[0]) / max(l_in, l_out, 1e-300)
                    if width > POS_TOL and len({prev.vid, cur.vid, nxt.vid}) == 3:
                        self.faces.append(([[prev.vid, cur.vid, nxt.vid]], "cap", CAP, -1))
                    if l_out > l_in:
                        prev.e = cur.e
                    del ring[i]
                    return True
        return False

    def _subdivide_contacts(self) -> bool:
        """Put a node on every edge whose interior a wavefront vertex touches."""
        nodes = [(r, i) for r, ring in enumerate(self.rings) for i in range(len(ring))]
        if len(nodes) < 3:
            return False
        X = np.array([self.rings[r][i].p for r, i in nodes])
        A = X
        B = np.array([self.rings[r][(i + 1) % len(self.rings[r])].p for r, i in nodes])
        D = B - A
        L2 = np.einsum("ij,ij->i", D, D)
        rel = X[:, None, :] - A[None, :, :]
        w = np.einsum("kjd,jd->kj", rel, D) / np.where(L2 > 0, L2, 1.0)[None, :]
        cross = rel[:, :, 0] * D[None, :, 1] - rel[:, :, 1] * D[None, :, 0]
        L = np.sqrt(L2)
        dist = np.abs(cross) / np.where(L > 0, L, 1.0)[None, :]
        tol = POS_TOL / np.where(L > 0, L, 1.0)[None, :]
        hit = (dist < POS_TOL) & (w > tol) & (w < 1 - tol) & (L[None, :] > 2 * POS_TOL)
        for k, j in zip(*np.nonzero(hit)):
            rv, iv = nodes[k]
            re, ie = nodes[j]
            if re == rv and (ie == iv or (ie + 1) % len(self.rings[re]) == iv):
                continue
            v, a = self.rings[rv][iv], self.rings[re][ie]
            self.rings[re].insert(ie + 1, _Node(v.p.copy(), v.vid, a.e))
            return True
        return False

    def _resolve_points(self) -> bool:
        """Re-pair wavefront chains meeting at one point.

        Around a point the outgoing and incoming arms of all chains through it
        are sorted counter-clockwise; each outgoing arm is joined to the next
        incoming arm, which leaves the remaining material on the left of every
        chain. Already consistent points are left untouched, so repeated
        calls are stable.
        """
        nodes = [nd for ring in self.rings for nd in ring]
        n = len(nodes)
        if n < 2:
            return False
        X = np.array([nd.p for nd in nodes])
        order = np.lexsort((X[:, 1], X[:, 0]))
        pred, succ = {}, {}
        for ring in self.rings:
            m = len(ring)
            for i, nd in enumerate(ring):
                pred[id(nd)] = ring[i - 1]
                succ[id(nd)] = ring[(i + 1) % m]
        full = round(2 * math.pi / 1e-9)
        for s in range(n):
            base = nodes[order[s]]
            cluster = [base]
            for t in range(s + 1, n):
                other = nodes[order[t]]
                if other.p[0] - base.p[0] >= POS_TOL:
                    break
                if np.linalg.norm(other.p - base.p) < POS_TOL:
                    cluster.append(other)
            if len(cluster) < 2:
                continue
            members = {id(nd) for nd in cluster}
            # runs of consecutive cluster nodes act as one chain through the point
            chains = []
            for nd in cluster:
                if id(pred[id(nd)]) in members:
                    continue
                end = nd
                while id(succ[id(end)]) in members and succ[id(end)] is not nd:
                    end = succ[id(end)]
                chains.append((nd, end))
            if not chains:
                continue
            arms = []
            for c, (first, last) in enumerate(chains):
                ui = -pred[id(first)].e.u
                uo = last.e.u
                # on equal angles the outgoing arm sorts first: overlapping
                # antiparallel edges then pair into a spike, removed later
                arms.append((round(math.atan2(ui[1], ui[0]) / 1e-9) % full, 1, c))
                arms.append((round(math.atan2(uo[1], uo[0]) / 1e-9) % full, 0, c))
            arms.sort()
            pairs = []
            for k, (_, kind, c) in enumerate(arms):
                if kind == 0:
                    nxt = arms[(k + 1) % len(arms)]
                    if nxt[1] != 1:
                        raise ExtrusionError("wavefront chains cross at a vertex event", base.p)
                    pairs.append((nxt[2], c))
            if len(chains) == len(cluster) and all(a == b for a, b in pairs):
                continue
            for nd in cluster[1:]:
                self.uf.union(base.vid, nd.vid)
            vid = self.uf.find(base.vid)
            link = {k: v for k, v in succ.items() if k not in members}
            keep = [nd for nd in nodes if id(nd) not in members]
            for into, out in pairs:
                new = _Node(base.p.copy(), vid, chains[out][1].e)
                link[id(pred[id(chains[into][0])])] = new
                link[id(new)] = succ[id(chains[out][1])]
                keep.append(new)
            seen, rings = set(), []
            for start in keep:
                if id(start) in seen:
                    continue
                ring, cur = [], start
                while id(cur) not in seen:
                    seen.add(id(cur))
                    ring.append(cur)
                    cur = link[id(cur)]
                rings.append(ring)
            self.rings = rings
            return True
        return False

    def _insert_steps(self):
        h = self.H
        for ring in self.rings:
            i = 0
            while i < len(ring):
                prev, cur = ring[i - 1], ring[i]
                ea, eb = prev.e, cur.e
                if abs(ea.u[0] * eb.u[1] - ea.u[1] * eb.u[0]) < PARALLEL_TOL and ea.u @ eb.u > 0:
                    sa, sb = self.speed(ea, h), self.speed(eb, h)
                    if abs(sa - sb) > 1e-12:
                        d = ea.n if sb > sa else -ea.n
                        step = _Edge(ea.src if sa < sb else eb.src, d, step=True)
                        ring.insert(i, _Node(cur.p.copy(), cur.vid, step))
                        # the copy ending the step keeps cur's outgoing edge
                        i += 1
                i += 1

    def cleanup(self, final: bool = False):
        for _ in range(MAX_EVENTS):
            if self._merge_close() | self._drop_degenerate():
                continue
            if self._remove_spike() or self._subdivide_contacts() or self._resolve_points():
                continue
            if final:
                return None
            self._insert_steps()
            return self.velocities()
        raise ExtrusionError("wavefront cleanup did not converge")

    # ---------------------------------------------------------------- closure

    def cap(self):
        outers, holes = [], []
        for ring in self.rings:
            a = _ring_area(ring)
            (outers if a > 0 else holes).append(ring)
        shapes = [ShapelyPolygon([n.p for n in r]) for r in outers]
        assigned: list[list[list[_Node]]] = [[] for _ in outers]
        for hole in holes:
            probe = ShapelyPolygon([n.p for n in hole]).representative_point()
            k = next((i for i, s in enumerate(shapes) if s.covers(probe)), None)
            if k is None:
                raise ExtrusionError("wavefront hole outside every outer ring", hole[0].p)
            assigned[k].append(hole)
        for ring, hs in zip(outers, assigned):
            self.faces.append(([[n.vid for n in ring]] + [[n.vid for n in h] for h in hs], "cap", CAP, -1))


def _dedupe_ring(ring: list[int]) -> list[int]:
    out = [v for i, v in enumerate(ring) if v != ring[i - 1]] if len(ring) > 1 else list(ring)
    return out


def _assemble(wf: _Wavefront, footprint: Polygon2) -> tuple[np.ndarray, list, list]:
    find = wf.uf.find
    V = np.array(wf.V)
    faces = [([[find(v) for v in r] for r in rings], label, src, seg) for rings, label, src, seg in wf.faces]
    floor = [[find(v) for v in r[::-1]] for r in wf.floor_rings]
    faces.append((floor, "floor", FLOOR, -1))
    used = sorted({v for rings, *_ in faces for r in rings for v in r})
    # vertices grouped by height for T-junction repair on horizontal edges
    by_z: dict[int, list[int]] = {}
    for v in used:
        by_z.setdefault(int(round(V[v, 2] / 1e-7)), []).append(v)
    by_z_arr = {k: np.array(vs) for k, vs in by_z.items()}

    def on_segment(a: int, b: int) -> list[int]:
        za = V[a, 2]
        if abs(V[b, 2] - za) > 1e-9:
            return []
        key = int(round(za / 1e-7))
        cands = [by_z_arr[k] for k in (key - 1, key, key + 1) if k in by_z_arr]
        if not cands:
            return []
        c = np.concatenate(cands)
        c = c[(c != a) & (c != b)]
        if not len(c):
            return []
        pa, d = V[a, :2], V[b, :2] - V[a, :2]
        L2 = float(d @ d)
        if L2 == 0:
            return []
        rel = V[c, :2] - pa
        w = rel @ d / L2
        dist = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / math.sqrt(L2)
        ok = (w > 1e-9) & (w < 1 - 1e-9) & (dist < POS_TOL) & (np.abs(V[c, 2] - za) < 1e-9)
        return [int(x) for x in c[ok][np.argsort(w[ok])]]

    tris, meta = [], []
    for rings, label, src, seg in faces:
        fixed = []
        for r in rings:
            r = _dedupe_ring(r)
            out = []
            for i, a in enumerate(r):
                b = r[(i + 1) % len(r)]
                out.append(a)
                out.extend(on_segment(a, b))
            out = _dedupe_ring(out)
            if len(set(out)) >= 3:
                fixed.append(out)
        if not fixed:
            continue
        if label in ("cap", "floor"):
            outer, holes = fixed[0], fixed[1:]
            if label == "floor":
                outer, holes = outer[::-1], [h[::-1] for h in holes]
            pts, t2 = triangulate_polygon(V[outer, :2], [V[h, :2] for h in holes])
            if not holes and len(t2) != len(outer) - 2:
                t2 = [(0, i, i + 1) for i in range(1, len(outer) - 1)]
            ids = outer + [v for h in holes for v in h]
            for a, b, c in t2:
                tri = (ids[a], ids[b], ids[c])
                tris.append(tri if label == "cap" else tri[::-1])
                meta.append((label, src, seg))
        else:
            ring = fixed[0]
            for a, b, c in triangulate_planar_face(V[ring]):
                tris.append((ring[a], ring[b], ring[c]))
                meta.append((label, src, seg))
    return V, tris, meta


def check_closed_manifold(triangles: np.ndarray) -> bool:
    """Every directed edge appears once and is matched by its reverse."""
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(t) == 0:
        return False
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    if np.any(e[:, 0] == e[:, 1]):
        return False
    fwd = {tuple(x) for x in e.tolist()}
    if len(fwd) != len(e):
        return False
    return all((b, a) in fwd for a, b in fwd)


def extrude(
    footprint: Polygon2,
    profiles: Mapping[int, Profile],
    h_cap: float = math.inf,
    footprint_id: int = 0,
    stop_at_profile_top: bool = True,
) -> MassModel:
    """Sweep ``footprint`` up along ``profiles`` (keyed by flat edge id).

    The sweep ends at ``h_cap``, or at the highest profile top when that is
    lower and ``stop_at_profile_top`` is set. Whatever wavefront is left is
    closed with a flat cap.
    """
    n_edges = footprint.n_edges
    missing = [i for i in range(n_edges) if i not in profiles]
    if missing:
        raise ValueError(f"no profile for footprint edges {missing}")
    if not h_cap > 0:
        raise ValueError("h_cap must be positive")
    top = min(h_cap, max(profiles[i].top for i in range(n_edges))) if stop_at_profile_top else h_cap
    breaks = sorted({b for i in range(n_edges) for b in profiles[i].breaks() if 0 < b < top})

    wf = _Wavefront(footprint, profiles)
    vel = wf.cleanup()
    for _ in range(MAX_EVENTS):
        if not wf.rings or wf.H >= top:
            break
        t_evt = wf.next_event(vel)
        t_brk = next((b for b in breaks if b > wf.H + 1e-12), math.inf)
        h = min(t_evt, t_brk, top)
        if not math.isfinite(h):
            raise ExtrusionError("the wavefront never closes; give a finite height cap")
        wf.advance(h, vel)
        if wf.H >= top:
            break
        vel = wf.cleanup()
    else:
        raise ExtrusionError("too many wavefront events", wf.rings[0][0].p if wf.rings else None)
    if wf.rings:
        # events landing exactly on the top still need their topology fixed
        wf.cleanup(final=True)
        wf.cap()

    V, tris, meta = _assemble(wf, footprint)
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if not check_closed_manifold(tris):
        raise ExtrusionError("extruded surface is not closed", footprint.outer[0])
    used = np.unique(tris)
    remap = np.full(len(V), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    mesh = TriMesh(V[used], remap[tris])
    labels = np.array([m[0] for m in meta])
    model = MassModel(
        mesh,
        labels,
        np.array([m[1] for m in meta], dtype=np.int64),
        np.array([m[2] for m in meta], dtype=np.int64),
        footprint,
        footprint_id,
        dict(profiles),
        float(wf.H),
    )
    return label_faces(model)


def label_faces(model: MassModel) -> MassModel:
    """Assign wall/roof/floor/cap from provenance and face orientation.

    Swept faces are walls when vertical (|n.z| < 1e-3), roofs otherwise.
    """
    nz = model.mesh.face_normals()[:, 2]
    labels = np.where(
        model.edge_ids == FLOOR,
        "floor",
        np.where(model.edge_ids == CAP, "cap", np.where(np.abs(nz) < 1e-3, "wall", "roof")),
    )
    model.labels = labels
    return model


def perturbed(footprint: Polygon2, eps: float = 1e-4, seed: int = 0) -> Polygon2:
    """Footprint with every vertex jittered by up to ``eps`` (for retrying
    numerically coincident events)."""
    rng = np.random.default_rng(seed)
    return Polygon2(
        footprint.outer + rng.uniform(-eps, eps, footprint.outer.shape),
        tuple(h + rng.uniform(-eps, eps, h.shape) for h in footprint.holes),
    )
