"""Command line entry point: ``massfit {reconstruct,synth,stats,sweep-params}``.

Exit codes: 0 success, 1 bad input (files, config, arguments), 2 a
pipeline stage failed.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import fields
from pathlib import Path

from . import __version__
from .io import InputError, load_inputs, read_geojson, write_geojson, write_mesh_obj, write_obj
from .metrics import STATS_HEADER
from .pipeline import PipelineConfig, StageError, export_outputs, rows_csv, run_pipeline, sweep_params
from .synth import PRESETS, SceneSpec, synth_generate

log = logging.getLogger("massfit")

LOCK_NAME = ".massfit.lock"
EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 1, 2

ALPHA_BETA_GRID = ((90.0, 10.0), (60.0, 40.0), (40.0, 60.0), (10.0, 90.0))
GAMMA_GRID = (90.0, 70.0, 50.0, 30.0, 10.0)


class LockedError(InputError):
    pass


@contextmanager
def dir_lock(out: Path):
    """Hold ``out/.massfit.lock`` for the duration; a second process gets LockedError."""
    out.mkdir(parents=True, exist_ok=True)
    path = out / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockedError(f"{out} is in use by another massfit process (remove {path} if stale)") from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield path
    finally:
        path.unlink(missing_ok=True)


# ---------------------------------------------------------------- config flags


def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("pipeline parameters (override --config)")
    for f in fields(PipelineConfig):
        kind = {"float": float, "int": int, "bool": _bool, "str": str}[str(f.type)]
        names = [f"--{f.name.replace('_', '-')}"]
        if "_" in f.name:
            names.append(f"--{f.name}")
        g.add_argument(*names, dest=f.name, type=kind, default=None, metavar=str(f.type).upper())


def _bool(v: str) -> bool:
    if v.lower() in ("true", "1", "yes"):
        return True
    if v.lower() in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {v!r}")


def config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    over = {f.name: getattr(args, f.name) for f in fields(PipelineConfig)}
    return cfg.with_overrides(**over)


# ---------------------------------------------------------------- verbs


def cmd_reconstruct(args) -> int:
    cfg = config_from_args(args)
    mesh, gis = load_inputs(args.mesh, args.gis)
    name = args.name or Path(args.mesh).stem
    out = Path(args.out)
    with dir_lock(out):
        result = run_pipeline(mesh, gis, cfg, name=name)
        export_outputs(result, out)
        (out / "config.txt").write_text(cfg.to_text())
    s = result.stats
    print(f"{name}: {len(result.models)} models, {s.sweep_edges} sweep edges, {s.variables} variables, "
          f"MSE {s.error_m2:.4f} m^2, {s.time_sec:.2f} s -> {out}")
    for note in result.fallbacks:
        print(f"  note: {note}")
    return EXIT_OK


def _scene_from_arg(arg: str, sigma, dropout) -> SceneSpec:
    if arg in PRESETS:
        kw = {k: v for k, v in (("sigma", sigma), ("dropout", dropout)) if v is not None}
        return PRESETS[arg](**kw)
    path = Path(arg)
    if not path.exists():
        raise InputError(f"{arg!r} is neither a preset ({', '.join(PRESETS)}) nor a scene file")
    try:
        spec = SceneSpec.from_json(path.read_text())
        if sigma is not None or dropout is not None:
            spec = SceneSpec(
                spec.buildings,
                spec.sigma if sigma is None else sigma,
                spec.dropout if dropout is None else dropout,
                spec.target_edge,
                spec.name,
            )
    except ValueError as e:
        raise InputError(f"{arg}: {e}") from e
    return spec


def cmd_synth(args) -> int:
    try:
        spec = _scene_from_arg(args.scene, args.sigma, args.dropout)
    except ValueError as e:
        raise InputError(str(e)) from e
    out = Path(args.out)
    with dir_lock(out):
        truth = synth_generate(spec, args.seed)
        write_mesh_obj(out / "mesh.obj", truth.mesh)
        write_geojson(out / "gis.geojson", truth.gis)
        write_geojson(out / "truth.geojson", truth.footprints)
        write_obj(out / "truth.obj", truth.models, comment=f"ground truth for {spec.name}")
        (out / "scene.json").write_text(spec.to_json() + "\n")
    print(f"{spec.name}: {len(truth.mesh.triangles)} triangles, {len(truth.footprints)} buildings, "
          f"sigma {spec.sigma}, dropout {spec.dropout}, seed {args.seed} -> {out}")
    return EXIT_OK


def _stats_files(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            found.extend(sorted(p.rglob("stats.csv")))
        elif p.exists():
            found.append(p)
        else:
            raise InputError(f"no such file or directory: {p}")
    return found


def cmd_stats(args) -> int:
    """Concatenate stats.csv rows from runs and append a total row."""
    files = _stats_files(args.paths)
    if not files:
        raise InputError("no stats.csv files found")
    rows = []
    for f in files:
        with open(f, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header is None or tuple(header) != STATS_HEADER:
                raise InputError(f"{f}: not a stats file (header must be {','.join(STATS_HEADER)})")
            rows.extend(r)
    lines = [",".join(STATS_HEADER)] + [",".join(r) for r in rows]
    if args.total and rows:
        try:
            sums = [sum(float(r[k]) for r in rows) for k in range(1, 5)]
        except (ValueError, IndexError) as e:
            raise InputError(f"malformed stats row: {e}") from e
        lines.append(f"TOTAL,{int(sums[0])},{int(sums[1])},{sums[2]:.6f},{sums[3] / len(rows):.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _grid(args) -> list[dict]:
    if args.grid == "gamma":
        vals = [float(v) for v in args.values.split(",")] if args.values else GAMMA_GRID
        return [{"gamma": v} for v in vals]
    if args.values:
        pairs = [tuple(float(x) for x in item.split(":")) for item in args.values.split(",")]
        if any(len(p) != 2 for p in pairs):
            raise InputError("alpha-beta values look like 90:10,40:60")
    else:
        pairs = ALPHA_BETA_GRID
    return [{"alpha": a, "beta": b} for a, b in pairs]


def cmd_sweep_params(args) -> int:
    cfg = config_from_args(args)
    mesh, gis = load_inputs(args.mesh, args.gis)
    try:
        grid = _grid(args)
    except ValueError as e:
        raise InputError(f"bad --values: {e}") from e
    truth = read_geojson(args.truth)[0] if args.truth else None
    rows = sweep_params(mesh, gis, cfg, grid, truth)
    text = rows_csv(rows)
    if args.out:
        out = Path(args.out)
        with dir_lock(out.parent if str(out.parent) else Path(".")):
            out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="massfit", description="Fit watertight mass models to urban meshes.")
    p.add_argument("--version", action="version", version=f"massfit {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("reconstruct", help="mesh + footprints -> mass models")
    r.add_argument("--mesh", required=True, help="input OBJ")
    r.add_argument("--gis", help="footprint GeoJSON")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--config", help="key=value config file")
    r.add_argument("--name", help="row name in stats.csv (default: mesh file stem)")
    _add_config_flags(r)
    r.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    s.add_argument("scene", help=f"preset ({', '.join(PRESETS)}) or scene JSON file")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sigma", type=float, help="vertex jitter, metres")
    s.add_argument("--dropout", type=float, help="fraction of triangles removed")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("stats", help="merge stats.csv files")
    t.add_argument("paths", nargs="+", help="stats.csv files or directories to search")
    t.add_argument("--total", action="store_true", help="append a TOTAL row (sums; error is the mean)")
    t.add_argument("--out")
    t.set_defaults(func=cmd_stats)

    w = sub.add_parser("sweep-params", help="run an alpha/beta or gamma grid")
    w.add_argument("--mesh", required=True)
    w.add_argument("--gis")
    w.add_argument("--truth", help="true footprints GeoJSON, adds an iou column")
    w.add_argument("--grid", choices=("alpha-beta", "gamma"), default="alpha-beta")
    w.add_argument("--values", help="gamma: 50,30,10; alpha-beta: 90:10,40:60")
    w.add_argument("--config")
    w.add_argument("--out", help="CSV path (default stdout)")
    _add_config_flags(w)
    w.set_defaults(func=cmd_sweep_params)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as e:
        print(f"massfit: stage failed: {e}", file=sys.stderr)
        return EXIT_STAGE
    except (InputError, ValueError, OSError) as e:
        print(f"massfit: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
