import math
from dataclasses import replace

import numpy as np
import pytest
from shapely.geometry import Point

from massfit.fracture import classify_polygons, fracture_plane
from massfit.geometry import Polygon2, Segment2
from massfit.segmentation import (
    EnergyParams,
    build_bip,
    count_labelings,
    evaluate_energy,
    footprints_from_labeling,
    restricted_growth_strings,
    selected_edges,
    solve,
)
from massfit.sweep import SweepEdge
from oracles import EnergyOracle, random_arrangement

BBOX = Polygon2.box(-10, -10, 20, 16)


def sweep(a, b, i):
    return SweepEdge(Segment2(tuple(map(float, a)), tuple(map(float, b))), 20.0, i)


def ring_sweeps(pts):
    return [sweep(pts[k], pts[(k + 1) % len(pts)], k) for k in range(len(pts))]


def unit_square_arr():
    arr = fracture_plane(ring_sweeps([(0, 0), (1, 0), (1, 1), (0, 1)]), BBOX)
    return classify_polygons(arr, [Polygon2.box(0, 0, 1, 1)], None, d_gis=0.0, h_min=1e9)


def grid_arr(keep_all=True, continuations=False):
    arr = fracture_plane(ring_sweeps([(0, 0), (10, 0), (10, 6), (0, 6)]), BBOX, continuations_count_as_sweep=continuations)
    gis = [BBOX] if keep_all else [Polygon2.box(0, 0, 10, 6)]
    return classify_polygons(arr, gis, None, h_min=1e9)


def stirling2(n, k):
    return sum((-1) ** j * math.comb(k, j) * (k - j) ** n for j in range(k + 1)) // math.factorial(k)


class TestEnergy:
    def test_perfect_square(self):
        arr = unit_square_arr()
        (pid,) = arr.kept_ids
        e = evaluate_energy(arr, {pid: 1})
        assert (e.o1, e.o2, e.o7, e.total) == (0.0, 0.0, 0.0, 0.0)

    def test_non_sweep_border_edge(self):
        arr = unit_square_arr()
        (pid,) = arr.kept_ids
        k = next(i for i in arr.active_edges() if arr.edges[i].length == pytest.approx(1.0))
        edges = list(arr.edges)
        edges[k] = replace(edges[k], is_sweep=False)
        e = evaluate_energy(replace(arr, edges=tuple(edges)), {pid: 1})
        assert e.o1 == pytest.approx(60.0)

    def test_unselected_shared_sweep(self):
        sw = ring_sweeps([(0, 0), (4, 0), (4, 2), (0, 2)]) + [sweep((2, 0), (2, 2), 4)]
        arr = classify_polygons(fracture_plane(sw, BBOX), [Polygon2.box(0, 0, 4, 2)], None, d_gis=0.0, h_min=1e9)
        assert len(arr.kept_ids) == 2
        (k,) = [i for i in arr.active_edges() if not arr.is_forced(i)]
        edges = list(arr.edges)
        edges[k] = replace(edges[k], height_diff=3.0)
        arr = replace(arr, edges=tuple(edges))
        e = evaluate_energy(arr, {p: 1 for p in arr.kept_ids})
        assert e.o1 == pytest.approx(80.0)
        assert e.o2 == pytest.approx(6.0)
        assert e.total == pytest.approx(86.0)

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(2)
        p = EnergyParams()
        for _ in range(20):
            arr = random_arrangement(rng)
            L = build_bip(arr, p).n_labels
            lab = {pid: int(rng.integers(1, L + 1)) for pid in arr.kept_ids}
            perm = rng.permutation(L) + 1
            relabeled = {pid: int(perm[l - 1]) for pid, l in lab.items()}
            assert evaluate_energy(arr, relabeled, p).total == pytest.approx(evaluate_energy(arr, lab, p).total, abs=1e-9)

    def test_matches_independent_oracle(self):
        rng = np.random.default_rng(4)
        p = EnergyParams()
        for _ in range(30):
            arr = random_arrangement(rng)
            oracle = EnergyOracle(arr, p.alpha, p.beta, p.pair_dist, p.pair_angle)
            L = build_bip(arr, p).n_labels
            lab = {pid: int(rng.integers(1, L + 1)) for pid in arr.kept_ids}
            assert evaluate_energy(arr, lab, p).total == pytest.approx(oracle.of(lab), abs=1e-9)


class TestBIP:
    def test_single_polygon(self):
        arr = unit_square_arr()
        bip = build_bip(arr)
        assert bip.n_variables == 1
        r = solve(bip, "exact")
        assert r.labeling == {arr.kept_ids[0]: 1}
        assert r.objective == pytest.approx(bip.constant)

    def test_linearisation_exact(self):
        rng = np.random.default_rng(11)
        p = EnergyParams()
        for _ in range(40):
            arr = random_arrangement(rng)
            bip = build_bip(arr, p)
            for _ in range(5):
                lab = {pid: int(rng.integers(1, bip.n_labels + 1)) for pid in arr.kept_ids}
                v = bip.encode(lab)
                assert bip.is_feasible(v)
                assert abs(bip.objective(v) - evaluate_energy(arr, lab, p).total) <= 1e-9

    def test_labeling_counts(self):
        for n in range(1, 8):
            for L in range(1, 5):
                assert count_labelings(n, L) == sum(stirling2(n, k) for k in range(1, min(n, L) + 1))
                rgs = restricted_growth_strings(n, L)
                assert len(rgs) == count_labelings(n, L)
                assert len({tuple(r) for r in rgs.tolist()}) == len(rgs)

    def test_three_polygons_two_labels(self):
        sw = ring_sweeps([(0, 0), (6, 0), (6, 2), (0, 2)]) + [sweep((2, 0), (2, 2), 4), sweep((4, 0), (4, 2), 5)]
        arr = classify_polygons(fracture_plane(sw, BBOX), [Polygon2.box(0, 0, 6, 2)], None, d_gis=0.0, h_min=1e9)
        p = EnergyParams(max_labels=2)
        bip = build_bip(arr, p)
        assert len(bip.x_index) == 6
        oracle = EnergyOracle(arr, p.alpha, p.beta, p.pair_dist, p.pair_angle)
        for mode in ("exact", "branch_and_bound"):
            r = solve(bip, mode)
            assert oracle.of(r.labeling) == pytest.approx(oracle.minimum(2), abs=1e-9)

    def test_grid_selects_the_building(self):
        arr = grid_arr(keep_all=True, continuations=False)
        assert len(arr.kept_ids) == 9
        bip = build_bip(arr)
        r = solve(bip, "branch_and_bound")
        sel = selected_edges(arr, r.labeling)
        chosen = [i for i, s in sel.items() if s and not arr.is_forced(i)]
        assert chosen and all(arr.edges[i].is_sweep for i in chosen)
        assert sum(arr.edges[i].length for i in chosen) == pytest.approx(32.0)
        mid = next(pid for pid in arr.kept_ids if arr.polygons[pid].shape.contains(Point(5, 3)))
        assert sum(1 for pid in arr.kept_ids if r.labeling[pid] == r.labeling[mid]) == 1

    def test_budget_returns_incumbent(self):
        rng = np.random.default_rng(0)
        arr = random_arrangement(rng)
        r = solve(build_bip(arr), "branch_and_bound", budget=1e-9)
        assert set(r.labeling) == set(arr.kept_ids)

    def test_variable_cap(self):
        from massfit.segmentation import BIPTooLarge

        with pytest.raises(BIPTooLarge):
            build_bip(grid_arr(), max_variables=5)


class TestFootprints:
    def test_one_label_square(self):
        arr = grid_arr()
        (fp,) = footprints_from_labeling(arr, {pid: 1 for pid in arr.kept_ids})
        assert len(fp.polygon.outer) == 4
        assert fp.area == pytest.approx(BBOX.area)

    def test_six_three_split(self):
        arr = grid_arr()
        lab = {pid: (1 if arr.polygons[pid].shape.centroid.x < 10 else 2) for pid in arr.kept_ids}
        assert sorted(lab.values()).count(1) == 6
        fps = footprints_from_labeling(arr, lab)
        assert len(fps) == 2
        a, b = (f.polygon.shape for f in fps)
        assert a.intersection(b).length == pytest.approx(26.0)
        assert a.intersection(b).area == pytest.approx(0.0)

    def test_single_polygon(self):
        arr = unit_square_arr()
        (pid,) = arr.kept_ids
        (fp,) = footprints_from_labeling(arr, {pid: 1})
        assert fp.polygon.shape.symmetric_difference(arr.polygons[pid].shape).area < 1e-12

    def test_union_area_matches_kept(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            arr = random_arrangement(rng)
            L = build_bip(arr).n_labels
            lab = {pid: int(rng.integers(1, L + 1)) for pid in arr.kept_ids}
            fps = footprints_from_labeling(arr, lab)
            kept = sum(arr.polygons[p].area for p in arr.kept_ids)
            assert sum(f.area for f in fps) == pytest.approx(kept, rel=1e-6)
