"""Footprint segmentation as a binary integer program.

Each kept arrangement polygon receives a footprint label. An edge is
*selected* when its two sides carry different labels (edges on the
outside border are always selected). The energy

    O1 = sum  alpha*|e| [unselected sweep edge] + beta*|e| [selected non-sweep edge]
    O2 = sum  |e| * height_diff(e) [unselected]
    O7 = sum  phi [both edges of a flagged pair selected],   phi = 0.5 * sum |e|

is linearised exactly into a BIP and minimised by enumeration or by
best-first branch and bound.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from shapely.ops import unary_union

from .fracture import OUTSIDE, Arrangement
from .geometry import Polygon2, merge_collinear, polygons_from_shapely, segment_distance

Labeling = dict  # polygon id -> label in 1..L


class BIPTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class EnergyParams:
    alpha: float = 40.0
    beta: float = 60.0
    pair_dist: float = 2.0
    pair_angle: float = 30.0
    max_labels: int | None = None

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.pair_dist <= 0:
            raise ValueError("pair_dist must be positive")
        if not 0 < self.pair_angle < 90:
            raise ValueError("pair_angle must lie in (0, 90) degrees")


@dataclass(frozen=True)
class Energy:
    o1: float
    o2: float
    o7: float

    @property
    def total(self) -> float:
        return self.o1 + self.o2 + self.o7


def label_count(arr: Arrangement, p: EnergyParams) -> int:
    n = len(arr.kept_ids)
    if p.max_labels is not None:
        return max(1, min(n, p.max_labels))
    if arr.n_gis is not None:
        return max(1, min(n, arr.n_gis + 2))
    return max(1, n)


def _edge_costs(arr: Arrangement, p: EnergyParams, i: int) -> tuple[float, float]:
    """(cost if unselected, cost if selected) for one edge."""
    e = arr.edges[i]
    L = e.length
    unselected = (p.alpha * L if e.is_sweep else 0.0) + L * e.height_diff
    selected = 0.0 if e.is_sweep else p.beta * L
    return unselected, selected


def flagged_pairs(arr: Arrangement, p: EnergyParams) -> list[tuple[int, int]]:
    """Edge pairs whose joint selection is penalised.

    Adjacent edges are flagged when they meet at less than ``pair_angle``;
    other pairs when closer than ``pair_dist``, except fragments of one
    line. Pairs of two always-selected edges only shift the energy by a
    constant and are left out.
    """
    ids = arr.active_edges()
    if not ids:
        return []
    segs = np.array([[arr.edges[i].segment.a, arr.edges[i].segment.b] for i in ids])
    lo = segs.min(axis=1) - p.pair_dist
    hi = segs.max(axis=1) + p.pair_dist
    forced = [arr.is_forced(i) for i in ids]
    ang_tol = math.radians(p.pair_angle)
    out = []
    for x in range(len(ids)):
        for y in range(x + 1, len(ids)):
            if forced[x] and forced[y]:
                continue
            if np.any(lo[x] > segs[y].max(axis=0)) or np.any(lo[y] > segs[x].max(axis=0)):
                continue
            ei, ej = arr.edges[ids[x]], arr.edges[ids[y]]
            shared = {ei.a, ei.b} & {ej.a, ej.b}
            if shared:
                v = shared.pop()
                pv = arr.vertices[v]
                oi = arr.vertices[ei.b if ei.a == v else ei.a] - pv
                oj = arr.vertices[ej.b if ej.a == v else ej.a] - pv
                c = float(oi @ oj) / (np.linalg.norm(oi) * np.linalg.norm(oj))
                if math.acos(max(-1.0, min(1.0, c))) < ang_tol:
                    out.append((ids[x], ids[y]))
                continue
            if ei.line == ej.line:
                continue
            if segment_distance(segs[x, 0], segs[x, 1], segs[y, 0], segs[y, 1]) < p.pair_dist:
                out.append((ids[x], ids[y]))
    return out


def selected_edges(arr: Arrangement, lab: Mapping[int, int]) -> dict[int, bool]:
    out = {}
    for i in arr.active_edges():
        l, r = arr.side_ids(i)
        if l == OUTSIDE or r == OUTSIDE:
            out[i] = True
        else:
            out[i] = lab[l] != lab[r]
    return out


def _check_labeling(arr: Arrangement, lab: Mapping[int, int], L: int):
    for pid in arr.kept_ids:
        if pid not in lab:
            raise ValueError(f"polygon {pid} has no label")
        if not 1 <= lab[pid] <= L:
            raise ValueError(f"label {lab[pid]} of polygon {pid} outside 1..{L}")


def evaluate_energy(arr: Arrangement, lab: Mapping[int, int], p: EnergyParams | None = None, pairs=None) -> Energy:
    """Direct evaluation of O1, O2 and O7 for a labeling."""
    p = p or EnergyParams()
    _check_labeling(arr, lab, label_count(arr, p))
    sel = selected_edges(arr, lab)
    o1 = o2 = 0.0
    for i, s in sel.items():
        e = arr.edges[i]
        if e.is_sweep and not s:
            o1 += p.alpha * e.length
        if s and not e.is_sweep:
            o1 += p.beta * e.length
        if not s:
            o2 += e.length * e.height_diff
    phi = 0.5 * sum(arr.edges[i].length for i in sel)
    if pairs is None:
        pairs = flagged_pairs(arr, p)
    o7 = sum(phi for i, j in pairs if sel[i] and sel[j])
    return Energy(o1, o2, o7)


def canonical(lab: Mapping[int, int], order: Sequence[int]) -> dict[int, int]:
    """Relabel so labels appear as 1, 2, ... in ``order``."""
    remap: dict[int, int] = {}
    out = {}
    for pid in order:
        out[pid] = remap.setdefault(lab[pid], len(remap) + 1)
    return out


@dataclass
class BIPInstance:
    """Linearised energy over binary variables.

    Variables: ``x[p,l]`` polygon p has label l; ``d[k,l]`` label l differs
    across free edge k; ``s[k]`` free edge k is selected; ``y[i,j]`` both
    edges of a flagged pair are selected. Constraints are kept as sparse
    rows ``(coeffs, sense, rhs)`` with sense in ``{'==', '<=', '>='}``.
    """

    names: list[str]
    constraints: list[tuple[dict[int, float], str, float]]
    cost: np.ndarray
    constant: float
    polygons: list[int]
    n_labels: int
    x_index: dict[tuple[int, int], int]
    free_edges: list[tuple[int, int, int]]  # (edge id, polygon position a, polygon position b)
    d_index: dict[tuple[int, int], int]
    s_index: dict[int, int]
    pairs: list[tuple[int, int]]
    y_index: dict[tuple[int, int], int]
    forced: frozenset
    edge_cost: dict[int, tuple[float, float]]
    phi: float

    @property
    def n_variables(self) -> int:
        return len(self.names)

    def encode(self, lab: Mapping[int, int]) -> np.ndarray:
        """Full 0/1 assignment for a labeling (canonicalised first)."""
        lab = canonical(lab, self.polygons)
        v = np.zeros(self.n_variables)
        for pid in self.polygons:
            v[self.x_index[(pid, lab[pid])]] = 1
        s_val = {}
        for k, a, b in self.free_edges:
            la, lb = lab[self.polygons[a]], lab[self.polygons[b]]
            for l in range(1, self.n_labels + 1):
                v[self.d_index[(k, l)]] = float((la == l) != (lb == l))
            s_val[k] = float(la != lb)
            v[self.s_index[k]] = s_val[k]
        for i, j in self.pairs:
            si = 1.0 if i in self.forced else s_val[i]
            sj = 1.0 if j in self.forced else s_val[j]
            v[self.y_index[(i, j)]] = max(0.0, si + sj - 1)
        return v

    def decode(self, v: np.ndarray) -> dict[int, int]:
        lab = {}
        for (pid, l), idx in self.x_index.items():
            if v[idx] > 0.5:
                lab[pid] = l
        return lab

    def objective(self, v: np.ndarray) -> float:
        return float(self.cost @ v) + self.constant

    def is_feasible(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        if np.any((v != 0) & (v != 1)):
            return False
        for coeffs, sense, rhs in self.constraints:
            lhs = sum(c * v[i] for i, c in coeffs.items())
            if sense == "==" and abs(lhs - rhs) > tol:
                return False
            if sense == "<=" and lhs > rhs + tol:
                return False
            if sense == ">=" and lhs < rhs - tol:
                return False
        return True


def _polygon_order(arr: Arrangement) -> list[int]:
    """Breadth-first order over polygon adjacency, from the largest polygon."""
    kept = arr.kept_ids
    nbrs: dict[int, set[int]] = {pid: set() for pid in kept}
    for i in arr.active_edges():
        l, r = arr.side_ids(i)
        if l != OUTSIDE and r != OUTSIDE:
            nbrs[l].add(r)
            nbrs[r].add(l)
    order, seen = [], set()
    for seed in sorted(kept, key=lambda q: (-round(arr.polygons[q].area, 9), q)):
        if seed in seen:
            continue
        dq = deque([seed])
        seen.add(seed)
        while dq:
            q = dq.popleft()
            order.append(q)
            for r in sorted(nbrs[q]):
                if r not in seen:
                    seen.add(r)
                    dq.append(r)
    return order


def build_bip(arr: Arrangement, p: EnergyParams | None = None, max_variables: int = 250_000) -> BIPInstance:
    p = p or EnergyParams()
    polys = _polygon_order(arr)
    if not polys:
        raise ValueError("arrangement has no kept polygons")
    L = label_count(arr, p)
    pos = {pid: k for k, pid in enumerate(polys)}
    active = arr.active_edges()
    forced = frozenset(i for i in active if arr.is_forced(i))
    free = [i for i in active if i not in forced]
    pairs = flagged_pairs(arr, p)
    n_vars = len(polys) * L + len(free) * (L + 1) + len(pairs)
    if n_vars > max_variables:
        raise BIPTooLarge(f"BIP would need {n_vars} variables (cap {max_variables}); raise gamma to drop weak sweep edges")

    names: list[str] = []
    x_index, d_index, s_index, y_index = {}, {}, {}, {}

    def var(name):
        names.append(name)
        return len(names) - 1

    for pid in polys:
        for l in range(1, L + 1):
            x_index[(pid, l)] = var(f"x[{pid},{l}]")
    free_edges = []
    for k in free:
        l_id, r_id = arr.side_ids(k)
        free_edges.append((k, pos[l_id], pos[r_id]))
        for l in range(1, L + 1):
            d_index[(k, l)] = var(f"d[{k},{l}]")
        s_index[k] = var(f"s[{k}]")
    for i, j in pairs:
        y_index[(i, j)] = var(f"y[{i},{j}]")

    cons: list[tuple[dict[int, float], str, float]] = []
    for pid in polys:
        cons.append(({x_index[(pid, l)]: 1.0 for l in range(1, L + 1)}, "==", 1.0))
    # label l is only opened after label l-1 appears on an earlier polygon
    for k, pid in enumerate(polys):
        for l in range(2, L + 1):
            row = {x_index[(pid, l)]: 1.0}
            for q in polys[:k]:
                row[x_index[(q, l - 1)]] = row.get(x_index[(q, l - 1)], 0.0) - 1.0
            cons.append((row, "<=", 0.0))
    for k, a, b in free_edges:
        pa, pb = polys[a], polys[b]
        for l in range(1, L + 1):
            d, xa, xb = d_index[(k, l)], x_index[(pa, l)], x_index[(pb, l)]
            cons.append(({d: 1.0, xa: -1.0, xb: 1.0}, ">=", 0.0))
            cons.append(({d: 1.0, xa: 1.0, xb: -1.0}, ">=", 0.0))
            cons.append(({d: 1.0, xa: -1.0, xb: -1.0}, "<=", 0.0))
            cons.append(({d: 1.0, xa: 1.0, xb: 1.0}, "<=", 2.0))
        row = {s_index[k]: 2.0}
        for l in range(1, L + 1):
            row[d_index[(k, l)]] = -1.0
        cons.append((row, "==", 0.0))
    for i, j in pairs:
        row = {y_index[(i, j)]: 1.0}
        rhs = -1.0
        for e in (i, j):
            if e in forced:
                rhs += 1.0
            else:
                row[s_index[e]] = row.get(s_index[e], 0.0) - 1.0
        cons.append((row, ">=", rhs))

    edge_cost = {i: _edge_costs(arr, p, i) for i in active}
    phi = 0.5 * sum(arr.edges[i].length for i in active)
    cost = np.zeros(len(names))
    constant = 0.0
    for i in forced:
        constant += edge_cost[i][1]
    for k in free:
        c0, c1 = edge_cost[k]
        constant += c0
        cost[s_index[k]] = c1 - c0
    for key, idx in y_index.items():
        cost[idx] = phi
    return BIPInstance(
        names, cons, cost, constant, polys, L, x_index, free_edges, d_index, s_index,
        pairs, y_index, forced, edge_cost, phi,
    )


# --------------------------------------------------------------------------
# solvers


@dataclass
class SolveResult:
    labeling: dict[int, int]
    objective: float
    optimal: bool
    nodes: int = 0
    seconds: float = 0.0
    mode: str = "branch_and_bound"


def restricted_growth_strings(n: int, L: int) -> np.ndarray:
    """All labelings of n items with at most L labels, up to permutation.

    Rows use labels 0..L-1 in first-appearance order.
    """
    rows = np.zeros((1, 0), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(n):
        new_rows, new_top = [], []
        for l in range(L):
            ok = top + 1 >= l if rows.shape[1] else np.full(len(top), l == 0)
            if not ok.any():
                continue
            sub = rows[ok]
            new_rows.append(np.hstack([sub, np.full((len(sub), 1), l, dtype=np.int8)]))
            new_top.append(np.maximum(top[ok], l))
        rows = np.vstack(new_rows)
        top = np.concatenate(new_top)
    return rows


def count_labelings(n: int, L: int) -> int:
    """Number of labelings of n items with at most L labels, up to permutation."""
    # ways[k]: prefixes using exactly k labels
    ways = [1] + [0] * L
    for _ in range(n):
        nxt = [0] * (L + 1)
        for k, w in enumerate(ways):
            if w:
                nxt[k] += w * k
                if k < L:
                    nxt[k + 1] += w
        ways = nxt
    return sum(ways)


def _batch_objective(bip: BIPInstance, labels: np.ndarray) -> np.ndarray:
    """BIP objective for a batch of label rows (labels 0-based by polygon position)."""
    N = len(labels)
    obj = np.full(N, bip.constant)
    s_val = {}
    for k, a, b in bip.free_edges:
        s = (labels[:, a] != labels[:, b]).astype(float)
        s_val[k] = s
        obj += bip.cost[bip.s_index[k]] * s
    for i, j in bip.pairs:
        si = 1.0 if i in bip.forced else s_val[i]
        sj = 1.0 if j in bip.forced else s_val[j]
        obj += bip.phi * np.maximum(0.0, si + sj - 1.0)
    return obj


def _solve_exact(bip: BIPInstance) -> SolveResult:
    n, L = len(bip.polygons), bip.n_labels
    states = count_labelings(n, L)
    if states > 2 ** 24:
        raise ValueError(f"exact mode needs at most 2^24 labelings, this instance has {states}")
    rows = restricted_growth_strings(n, L)
    best_val, best_row = math.inf, None
    for start in range(0, len(rows), 65536):
        chunk = rows[start : start + 65536]
        obj = _batch_objective(bip, chunk)
        k = int(np.argmin(obj))
        if obj[k] < best_val - 1e-12:
            best_val, best_row = float(obj[k]), chunk[k]
    lab = {pid: int(best_row[i]) + 1 for i, pid in enumerate(bip.polygons)}
    return SolveResult(lab, best_val, True, len(rows), mode="exact")


class _Tree:
    """Precomputed decision schedule for branch and bound.

    Polygons are assigned in BIP order; a free edge is decided once both of
    its polygons are assigned, a pair once both of its edges are.
    """

    def __init__(self, bip: BIPInstance):
        self.bip = bip
        n = len(bip.polygons)
        self.n = n
        step_of: dict[int, int] = {k: -1 for k in bip.forced}
        self.edges_at: list[list[tuple[int, int, float, float]]] = [[] for _ in range(n)]
        self.min_total = 0.0
        for k, a, b in bip.free_edges:
            c0, c1 = bip.edge_cost[k]
            step = max(a, b)
            step_of[k] = step
            self.edges_at[step].append((k, min(a, b), c0, c1))
            self.min_total += min(c0, c1)
        self.pairs_at: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for i, j in bip.pairs:
            self.pairs_at[max(step_of[i], step_of[j])].append((i, j))

    def delta(self, assign: Sequence[int], step: int, label: int) -> tuple[float, dict[int, bool]]:
        """Bound increase from assigning ``label`` at ``step``."""
        d = 0.0
        sel = {}
        for k, other, c0, c1 in self.edges_at[step]:
            s = assign[other] != label
            sel[k] = s
            d += (c1 if s else c0) - min(c0, c1)
        return d, sel

    def pair_penalty(self, step: int, selected) -> float:
        tot = 0.0
        for i, j in self.pairs_at[step]:
            if selected(i) and selected(j):
                tot += self.bip.phi
        return tot


def _full_value(tree: _Tree, labels: Sequence[int]) -> float:
    return float(_batch_objective(tree.bip, np.array([labels]))[0])


def _greedy_incumbent(tree: _Tree) -> list[int]:
    """Greedy dive followed by single-polygon label moves."""
    bip, L, n = tree.bip, tree.bip.n_labels, tree.n
    assign: list[int] = []
    top = -1
    for step in range(n):
        best = None
        for l in range(min(L, top + 2)):
            d, _ = tree.delta(assign + [l], step, l)
            if best is None or d < best[0]:
                best = (d, l)
        assign.append(best[1])
        top = max(top, best[1])
    val = _full_value(tree, assign)
    improved = True
    while improved:
        improved = False
        for i in range(n):
            for l in range(L):
                if l == assign[i]:
                    continue
                trial = assign.copy()
                trial[i] = l
                v = _full_value(tree, trial)
                if v < val - 1e-9:
                    assign, val, improved = trial, v, True
    return _canonical_rows(assign)


def _canonical_rows(assign: Sequence[int]) -> list[int]:
    remap: dict[int, int] = {}
    return [remap.setdefault(a, len(remap)) for a in assign]


def _solve_bnb(bip: BIPInstance, budget: float) -> SolveResult:
    t_start = time.perf_counter()
    tree = _Tree(bip)
    n, L = tree.n, bip.n_labels
    inc = _greedy_incumbent(tree)
    inc_val = _full_value(tree, inc)
    # the constant holds the unselected cost of every free edge; swap those for their minima
    root = bip.constant - sum(bip.edge_cost[k][0] for k, _, _ in bip.free_edges) + tree.min_total
    counter = itertools.count()
    heap = [(root, 0, next(counter), (), -1, frozenset())]
    nodes = 0
    optimal = True
    while heap:
        bound, negdepth, _, assign, top, sel_set = heapq.heappop(heap)
        if bound >= inc_val - 1e-9:
            continue
        nodes += 1
        if nodes % 512 == 0 and time.perf_counter() - t_start > budget:
            optimal = False
            break
        step = len(assign)
        if step == n:
            inc, inc_val = list(assign), bound
            continue
        for l in range(min(L, top + 2)):
            child = assign + (l,)
            d, sel = tree.delta(child, step, l)
            newly = frozenset(k for k, s in sel.items() if s)
            child_sel = sel_set | newly
            pen = tree.pair_penalty(step, lambda e: e in bip.forced or e in child_sel)
            cb = bound + d + pen
            if cb < inc_val - 1e-9:
                heapq.heappush(heap, (cb, -(step + 1), next(counter), child, max(top, l), child_sel))
    lab = {pid: inc[i] + 1 for i, pid in enumerate(bip.polygons)}
    return SolveResult(lab, inc_val, optimal, nodes, mode="branch_and_bound")


def solve(bip: BIPInstance, mode: str = "branch_and_bound", budget: float = 300.0) -> SolveResult:
    """Minimise the BIP objective.

    ``exact`` enumerates every labeling up to label permutation;
    ``branch_and_bound`` runs best-first search (ties broken towards deeper
    nodes, then insertion order) and returns its incumbent when the time
    budget runs out, with ``optimal=False``.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    t0 = time.perf_counter()
    if mode == "exact":
        res = _solve_exact(bip)
    elif mode == "branch_and_bound":
        res = _solve_bnb(bip, budget)
    else:
        raise ValueError(f"unknown solver mode {mode!r}")
    res.seconds = time.perf_counter() - t0
    check = bip.objective(bip.encode(res.labeling))
    if abs(check - res.objective) > 1e-6 * max(1.0, abs(check)):
        raise RuntimeError("internal error: solver objective disagrees with BIP encoding")
    res.labeling = canonical(res.labeling, bip.polygons)
    return res


# --------------------------------------------------------------------------
# footprints


@dataclass(frozen=True)
class Footprint:
    label: int
    polygon: Polygon2

    @property
    def area(self) -> float:
        return self.polygon.area


def footprints_from_labeling(arr: Arrangement, lab: Mapping[int, int], angle_deg: float = 0.5) -> list[Footprint]:
    """Union same-label polygons into footprints (holes kept, collinear
    vertices within ``angle_deg`` removed)."""
    groups: dict[int, list[int]] = {}
    for pid in arr.kept_ids:
        groups.setdefault(lab[pid], []).append(pid)
    out = []
    for label in sorted(groups):
        geom = unary_union([arr.polygons[pid].shape for pid in groups[label]])
        parts = polygons_from_shapely(geom)
        parts.sort(key=lambda q: (-round(q.area, 9), round(q.bbox()[0], 9), round(q.bbox()[1], 9)))
        for part in parts:
            outer = merge_collinear(part.outer, angle_deg)
            holes = tuple(merge_collinear(h, angle_deg) for h in part.holes)
            out.append(Footprint(label, Polygon2(outer, holes)))
    return out
