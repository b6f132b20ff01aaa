"""End-to-end reconstruction: mesh and footprints in, labeled mass models out."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .extrusion import ExtrusionError, MassModel, extrude, height_cap_from_mesh, perturbed
from .fracture import Arrangement, classify_polygons, compute_height_diffs, fracture_plane, working_bbox
from .geometry import Polygon2, TriMesh
from .io import write_obj
from .metrics import ErrorGrid, RunStats, error_grid, grid_csv, grid_pgm, mse, stats_csv
from .profiles import QUALITIES, Profile, fit_edge_profile, interior_max_height
from .segmentation import EnergyParams, Footprint, SolveResult, build_bip, footprints_from_labeling, solve
from .sweep import SweepEdge, align_to_gis, cluster_contours, extract_contours, sweep_edges_from_clusters

log = logging.getLogger(__name__)

STAGES = ("extract", "cluster", "fracture", "classify", "solve", "footprints", "profiles", "extrude", "metrics")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@dataclass
class PipelineConfig:
    """Every tunable of a run. Angles are in degrees, lengths in metres."""

    slice_interval: float = 0.2
    contour_simplify: float = 0.1
    min_wall_slope: float = 60.0
    theta_snap: float = 10.0
    d_snap: float = 1.0
    theta_tol: float = 15.0
    d_tol: float = 0.5
    gamma: float = 10.0
    bbox_margin: float = 5.0
    continuations_count_as_sweep: bool = True
    h_min: float = 1.0
    d_gis: float = 2.0
    alpha: float = 40.0
    beta: float = 60.0
    pair_dist: float = 2.0
    pair_angle: float = 30.0
    max_labels: int = 0
    solver: str = "branch_and_bound"
    budget: float = 300.0
    max_variables: int = 250_000
    quality: str = "high"
    profile_spacing: float = 1.0
    height_margin: float = 0.5
    cell: float = 0.25
    seed: int = 0

    def __post_init__(self):
        positive = (
            "slice_interval", "theta_tol", "d_tol", "bbox_margin", "alpha", "beta", "pair_dist",
            "budget", "profile_spacing", "cell", "d_snap", "theta_snap", "max_variables",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("contour_simplify", "gamma", "h_min", "d_gis", "height_margin", "max_labels"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.min_wall_slope <= 90:
            raise ValueError("min_wall_slope must lie in [0, 90]")
        if not 0 < self.pair_angle < 90:
            raise ValueError("pair_angle must lie in (0, 90)")
        if self.solver not in ("exact", "branch_and_bound"):
            raise ValueError("solver is exact or branch_and_bound")
        if self.quality not in QUALITIES:
            raise ValueError(f"quality is one of {QUALITIES}")

    def energy(self) -> EnergyParams:
        return EnergyParams(self.alpha, self.beta, self.pair_dist, self.pair_angle, self.max_labels or None)

    # flat key=value text; '#' starts a comment

    def to_text(self) -> str:
        lines = ["# massfit pipeline configuration"]
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> PipelineConfig:
        kinds = {f.name: f.type for f in fields(cls)}
        vals = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {n}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in kinds:
                raise ValueError(f"config line {n}: unknown key {k!r}")
            vals[k] = _parse_value(kinds[k], v, k)
        return cls(**vals)

    @classmethod
    def load(cls, path) -> PipelineConfig:
        return cls.from_text(Path(path).read_text())

    def with_overrides(self, **kw) -> PipelineConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _parse_value(kind, v: str, key: str):
    kind = kind if isinstance(kind, str) else kind.__name__
    try:
        if kind == "bool":
            if v.lower() in ("true", "1", "yes"):
                return True
            if v.lower() in ("false", "0", "no"):
                return False
            raise ValueError(v)
        if kind == "int":
            return int(v)
        if kind == "float":
            return float(v)
    except ValueError:
        raise ValueError(f"bad value {v!r} for {key} ({kind})") from None
    return v


@dataclass
class PipelineResult:
    models: list[MassModel]
    stats: RunStats
    grid: ErrorGrid
    footprints: list[Footprint] = field(default_factory=list)
    sweeps: list[SweepEdge] = field(default_factory=list)
    arrangement: Arrangement | None = None
    solution: SolveResult | None = None
    profiles: list[dict[int, Profile]] = field(default_factory=list)
    fallbacks: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def __iter__(self):
        # unpacks as (models, stats, grid)
        return iter((self.models, self.stats, self.grid))


def worker_count() -> int:
    """Thread cap from MASSFIT_THREADS (default: CPU count, at most 8)."""
    raw = os.environ.get("MASSFIT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring MASSFIT_THREADS=%r", raw)
    return max(1, min(8, os.cpu_count() or 1))


def _pmap(fn, items: Sequence, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


class _Stage:
    def __init__(self, name: str, timings: dict):
        self.name, self.timings = name, timings

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, kind, exc, tb):
        self.timings[self.name] = time.perf_counter() - self.t0
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def extract_sweeps(mesh: TriMesh, gis: Sequence[Polygon2], cfg: PipelineConfig, timings: dict | None = None):
    """Slice, align, cluster and threshold; returns the clusters and sweep edges."""
    timings = {} if timings is None else timings
    with _Stage("extract", timings):
        contours = extract_contours(mesh, cfg.slice_interval, cfg.contour_simplify, cfg.min_wall_slope)
        contours = align_to_gis(contours, gis, math.radians(cfg.theta_snap), cfg.d_snap)
    with _Stage("cluster", timings):
        clusters = cluster_contours(contours, math.radians(cfg.theta_tol), cfg.d_tol, cfg.slice_interval)
        sweeps = sweep_edges_from_clusters(clusters, cfg.gamma, gis)
    return clusters, sweeps


def _extrude_footprint(fp: Polygon2, profiles: dict[int, Profile], h_cap: float, fid: int, notes: list[str]) -> MassModel:
    """Extrude with the two documented retries: a 1e-4 m jitter, then plain walls."""
    try:
        return extrude(fp, profiles, h_cap, footprint_id=fid)
    except ExtrusionError as first:
        notes.append(f"footprint {fid}: {first}; retrying with a perturbed footprint")
    jittered = perturbed(fp, 1e-4, seed=fid)
    try:
        return extrude(jittered, profiles, h_cap, footprint_id=fid)
    except ExtrusionError as second:
        notes.append(f"footprint {fid}: {second}; falling back to vertical profiles")
    top = max(p.top for p in profiles.values())
    walls = {k: Profile.vertical(min(top, h_cap), "simple") for k in profiles}
    return extrude(fp, walls, h_cap, footprint_id=fid)


def run_pipeline(mesh: TriMesh, gis: Sequence[Polygon2], cfg: PipelineConfig | None = None, name: str = "run") -> PipelineResult:
    """Run every stage in order. Failures surface as :class:`StageError`."""
    cfg = cfg or PipelineConfig()
    gis = list(gis)
    timings: dict[str, float] = {}
    t_start = time.perf_counter()
    if mesh.is_empty:
        raise StageError("extract", "input mesh is empty")
    clusters, sweeps = extract_sweeps(mesh, gis, cfg, timings)
    if not sweeps:
        raise StageError("cluster", "no sweep edges; lower gamma")

    with _Stage("fracture", timings):
        arr = fracture_plane(
            sweeps,
            working_bbox(gis, mesh, cfg.bbox_margin),
            continuations_count_as_sweep=cfg.continuations_count_as_sweep,
        )
    with _Stage("classify", timings):
        arr = classify_polygons(arr, gis, mesh, cfg.h_min, cfg.d_gis)
        arr = compute_height_diffs(arr, mesh)
    with _Stage("solve", timings):
        bip = build_bip(arr, cfg.energy(), cfg.max_variables)
        sol = solve(bip, cfg.solver, cfg.budget)
    with _Stage("footprints", timings):
        footprints = footprints_from_labeling(arr, sol.labeling)

    h_cap = height_cap_from_mesh(mesh, cfg.height_margin)
    workers = worker_count()

    with _Stage("profiles", timings):

        def fit(fp: Footprint) -> dict[int, Profile]:
            poly = fp.polygon
            # a lower building's edge along a party wall would otherwise
            # climb its taller neighbour's exposed wall
            inner = interior_max_height(mesh, poly)
            limit = min(h_cap, inner) if inner > 0 else h_cap
            return {
                k: fit_edge_profile(mesh, a, b, poly, cfg.quality, cfg.profile_spacing, limit, limit)
                for k, a, b in poly.edges()
            }

        profiles = _pmap(fit, footprints, workers)

    notes: list[str] = []
    with _Stage("extrude", timings):
        per_fp = [[] for _ in footprints]

        def build(i: int) -> MassModel:
            return _extrude_footprint(footprints[i].polygon, profiles[i], h_cap, i, per_fp[i])

        models = _pmap(build, list(range(len(footprints))), workers)
        for n in per_fp:
            notes.extend(n)
    for n in notes:
        log.warning(n)

    with _Stage("metrics", timings):
        grid = error_grid(mesh, models, cfg.cell)
        err = mse(grid) if grid.valid.any() else float("nan")
    elapsed = time.perf_counter() - t_start
    stats = RunStats(name, len(sweeps), bip.n_variables, elapsed, err if math.isfinite(err) else 0.0)
    return PipelineResult(models, stats, grid, footprints, sweeps, arr, sol, profiles, notes, timings)


# ---------------------------------------------------------------- export


def profiles_csv(models: Sequence[MassModel]) -> str:
    """One polyline per footprint edge: the characteristic-profile table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("footprint", "edge", "point", "offset", "height", "quality"))
    for m in models:
        for k in sorted(m.profiles):
            p = m.profiles[k]
            for j, (o, h) in enumerate(p.points):
                w.writerow((m.footprint_id, k, j, f"{o:.6f}", f"{h:.6f}", p.quality))
    return buf.getvalue()


def export_outputs(result: PipelineResult, out_dir, block_name: str = "block") -> list[Path]:
    """Write models, the combined block, statistics, error grid and profiles."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, m in enumerate(result.models):
        p = out / f"model_{i:03d}.obj"
        write_obj(p, m, comment=f"footprint {m.footprint_id}")
        written.append(p)
    p = out / f"{block_name}.obj"
    write_obj(p, result.models, comment=f"{len(result.models)} models")
    written.append(p)
    for fname, text in (
        ("stats.csv", stats_csv([result.stats])),
        ("error_grid.csv", grid_csv(result.grid)),
        ("profiles.csv", profiles_csv(result.models)),
    ):
        (out / fname).write_text(text)
        written.append(out / fname)
    (out / "error_grid.pgm").write_bytes(grid_pgm(result.grid))
    written.append(out / "error_grid.pgm")
    return written


def config_dict(cfg: PipelineConfig) -> dict:
    return asdict(cfg)


def sweep_params(
    mesh: TriMesh,
    gis: Sequence[Polygon2],
    cfg: PipelineConfig,
    grid: Sequence[dict],
    truth: Sequence[Polygon2] | None = None,
) -> list[dict]:
    """Run the pipeline once per parameter override set; one summary row each."""
    from .metrics import segmentation_iou

    rows = []
    for over in grid:
        c = cfg.with_overrides(**over)
        row = dict(over)
        try:
            res = run_pipeline(mesh, gis, c, name=",".join(f"{k}={v}" for k, v in over.items()))
        except StageError as e:
            row.update(status=f"failed:{e.stage}", footprints=0, sweep_edges=0, variables=0, time_sec=0.0, error_m2=float("nan"))
            rows.append(row)
            continue
        row.update(
            status="ok",
            footprints=len(res.footprints),
            sweep_edges=res.stats.sweep_edges,
            variables=res.stats.variables,
            time_sec=res.stats.time_sec,
            error_m2=res.stats.error_m2,
        )
        if truth is not None:
            row["iou"] = segmentation_iou(res.footprints, truth).mean_iou
        rows.append(row)
    return rows


def rows_csv(rows: Sequence[dict]) -> str:
    keys: list[str] = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def dump_sweeps(sweeps: Sequence[SweepEdge]) -> np.ndarray:
    return np.array([[*s.segment.a, *s.segment.b, s.supported_area] for s in sweeps])
