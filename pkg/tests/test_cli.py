import subprocess
import sys

import pytest

from massfit.cli import LOCK_NAME, build_parser, main
from massfit.io import read_obj
from massfit.metrics import read_stats_csv
from massfit.pipeline import PipelineConfig


@pytest.fixture(scope="module")
def box_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("box")
    assert main(["synth", "box", "--seed", "0", "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def box_run(box_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = main(["reconstruct", "--mesh", str(box_dir / "mesh.obj"), "--gis", str(box_dir / "gis.geojson"), "--out", str(out)])
    assert rc == 0
    return out


def test_synth_writes_scene(box_dir):
    names = {p.name for p in box_dir.iterdir()}
    assert {"mesh.obj", "gis.geojson", "truth.geojson", "truth.obj", "scene.json"} <= names
    assert LOCK_NAME not in names
    mesh, _ = read_obj(box_dir / "mesh.obj")
    assert len(mesh.triangles) > 100


def test_synth_from_descriptor(tmp_path):
    spec = tmp_path / "scene.json"
    spec.write_text('{"name": "shed", "buildings": [{"rect": [0, 0, 4, 3], "roof": "gable", "height": 4, "eaves": 2.5}]}')
    assert main(["synth", str(spec), "--sigma", "0", "--dropout", "0", "--out", str(tmp_path / "o")]) == 0
    mesh, _ = read_obj(tmp_path / "o" / "mesh.obj")
    assert mesh.vertices[:, 2].max() == 4.0


def test_reconstruct_outputs(box_run):
    names = {p.name for p in box_run.iterdir()}
    assert {"model_000.obj", "block.obj", "stats.csv", "error_grid.csv", "error_grid.pgm", "profiles.csv", "config.txt"} <= names
    (row,) = read_stats_csv(box_run / "stats.csv")
    assert row.name == "mesh" and row.error_m2 < 0.05
    assert PipelineConfig.load(box_run / "config.txt") == PipelineConfig()


def test_flags_override_config(box_dir, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("gamma=40\nquality=moderate\n")
    out = tmp_path / "o"
    rc = main(
        ["reconstruct", "--mesh", str(box_dir / "mesh.obj"), "--gis", str(box_dir / "gis.geojson"), "--out", str(out),
         "--config", str(cfg), "--gamma", "20", "--name", "b"]
    )
    assert rc == 0
    got = PipelineConfig.load(out / "config.txt")
    assert got.gamma == 20.0 and got.quality == "moderate"
    assert read_stats_csv(out / "stats.csv")[0].name == "b"


def test_flag_spellings():
    p = build_parser()
    a = p.parse_args(["reconstruct", "--mesh", "m", "--out", "o", "--pair-dist", "3", "--pair_angle", "20"])
    assert a.pair_dist == 3.0 and a.pair_angle == 20.0


def test_stats_total(box_run, tmp_path, capsys):
    assert main(["stats", str(box_run), str(box_run / "stats.csv"), "--total"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "name,sweep_edges,variables,time_sec,error_m2"
    assert len(lines) == 4 and lines[-1].startswith("TOTAL,")
    row = lines[1].split(",")
    total = lines[-1].split(",")
    assert int(total[1]) == 2 * int(row[1])
    assert float(total[4]) == pytest.approx(float(row[4]), abs=1e-6)


def test_sweep_params_gamma(box_dir, tmp_path):
    out = tmp_path / "grid.csv"
    rc = main(
        ["sweep-params", "--mesh", str(box_dir / "mesh.obj"), "--gis", str(box_dir / "gis.geojson"),
         "--truth", str(box_dir / "truth.geojson"), "--grid", "gamma", "--values", "50,10", "--out", str(out)]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[:2] == ["gamma", "status"] and "iou" in lines[0]
    assert len(lines) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["reconstruct", "--mesh", "/nonexistent.obj", "--out", "x"],
        ["reconstruct"],
        ["synth", "castle", "--out", "x"],
        ["stats", "/nonexistent"],
        ["bogus"],
    ],
)
def test_input_errors_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_bad_config_value_exit_1(box_dir, tmp_path):
    argv = ["reconstruct", "--mesh", str(box_dir / "mesh.obj"), "--out", str(tmp_path), "--alpha", "-1"]
    assert main(argv) == 1


def test_stage_failure_exit_2(box_dir, tmp_path, capsys):
    argv = ["reconstruct", "--mesh", str(box_dir / "mesh.obj"), "--gis", str(box_dir / "gis.geojson"),
            "--out", str(tmp_path), "--gamma", "100000"]
    assert main(argv) == 2
    assert "no sweep edges; lower gamma" in capsys.readouterr().err


def test_lock_blocks_second_process(box_dir, tmp_path, capsys):
    (tmp_path / LOCK_NAME).write_text("123\n")
    argv = ["reconstruct", "--mesh", str(box_dir / "mesh.obj"), "--out", str(tmp_path)]
    assert main(argv) == 1
    assert "in use" in capsys.readouterr().err
    # the stale lock is left for the user to inspect
    assert (tmp_path / LOCK_NAME).exists()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "massfit", "synth", "house", "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "mesh.obj").exists()
    r = subprocess.run([sys.executable, "-m", "massfit", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("massfit ")
