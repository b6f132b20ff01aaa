import numpy as np
import pytest
import shapely

from massfit.extrusion import check_closed_manifold
from massfit.metrics import STATS_HEADER, segmentation_iou
from massfit.pipeline import STAGES, PipelineConfig, StageError, export_outputs, run_pipeline, sweep_params, worker_count
from massfit.synth import BuildingSpec, SceneSpec, box_scene, house_scene, synth_generate, terrace_scene


def masked(path):
    """File bytes, with the wall-clock column of a stats file blanked."""
    data = path.read_bytes()
    if path.name != "stats.csv":
        return data
    lines = data.decode().splitlines()
    k = STATS_HEADER.index("time_sec")
    return "\n".join(",".join("" if i == k else c for i, c in enumerate(line.split(","))) for line in lines).encode()


class TestEndToEnd:
    def test_box(self, get_scene, get_reconstruction):
        truth, r = get_scene("box"), get_reconstruction("box")
        assert len(r.models) == 1
        m = r.models[0]
        assert m.face_count("wall") == 4 and m.face_count("cap") == 1 and m.face_count("roof") == 0
        assert r.stats.error_m2 < 0.05
        assert segmentation_iou(r.footprints, truth.footprints).mean_iou >= 0.95
        assert all(check_closed_manifold(x.mesh.triangles) for x in r.models)

    def test_terrace_party_wall(self, get_scene, get_reconstruction):
        r = get_reconstruction("terrace")
        assert len(r.footprints) == 2
        a, b = (f.polygon.shape for f in r.footprints)
        shared = shapely.get_coordinates(a.boundary.intersection(b.boundary))
        assert len(shared) >= 2
        assert np.all(np.abs(shared[:, 0] - 6.0) <= 0.3)
        # spans the depth of the terrace
        assert np.ptp(shared[:, 1]) > 7.0

    def test_stage_order_and_timings(self, get_reconstruction):
        r = get_reconstruction("house")
        assert tuple(r.timings) == STAGES
        assert r.stats.variables > 0 and r.stats.sweep_edges >= 4

    def test_result_unpacks(self, get_reconstruction):
        models, stats, grid = get_reconstruction("box")
        assert len(models) == 1 and stats.name == "box" and grid.valid.any()

    def test_no_sweep_edges(self, get_scene):
        t = get_scene("box")
        with pytest.raises(StageError, match="no sweep edges; lower gamma") as e:
            run_pipeline(t.mesh, t.gis, PipelineConfig(gamma=1e6))
        assert e.value.stage == "cluster"

    def test_simple_quality_watertight(self, get_reconstruction):
        r = get_reconstruction("house", quality="simple")
        assert r.models
        for m in r.models:
            assert check_closed_manifold(m.mesh.triangles)
            assert m.face_count("roof") == 0

    def test_alpha_monotone(self, get_scene):
        t = get_scene("terrace")
        rows = sweep_params(t.mesh, t.gis, PipelineConfig(), [{"alpha": a} for a in (90.0, 40.0, 10.0)])
        counts = [r["footprints"] for r in rows]
        assert counts == sorted(counts, reverse=True)


class TestDeterminism:
    def test_exports_identical(self, tmp_path, monkeypatch):
        t = synth_generate(house_scene(), 3)
        out = []
        for k, threads in enumerate(("1", "4")):
            monkeypatch.setenv("MASSFIT_THREADS", threads)
            d = tmp_path / str(k)
            export_outputs(run_pipeline(t.mesh, t.gis, PipelineConfig(), name="house"), d)
            out.append(d)
        names = sorted(p.name for p in out[0].iterdir())
        assert names == sorted(p.name for p in out[1].iterdir())
        assert {"model_000.obj", "block.obj", "stats.csv", "error_grid.csv", "error_grid.pgm", "profiles.csv"} <= set(names)
        for n in names:
            assert masked(out[0] / n) == masked(out[1] / n), n

    def test_stats_header(self, tmp_path, get_reconstruction):
        export_outputs(get_reconstruction("box"), tmp_path)
        assert (tmp_path / "stats.csv").read_text().splitlines()[0] == "name,sweep_edges,variables,time_sec,error_m2"


class TestConfig:
    def test_round_trip_fixed_point(self):
        c = PipelineConfig(gamma=30.0, alpha=12.5, quality="moderate", continuations_count_as_sweep=False, seed=9)
        text = c.to_text()
        back = PipelineConfig.from_text(text)
        assert back == c and back.to_text() == text

    def test_defaults(self):
        c = PipelineConfig()
        assert (c.slice_interval, c.gamma, c.alpha, c.beta, c.pair_dist, c.pair_angle) == (0.2, 10.0, 40.0, 60.0, 2.0, 30.0)
        assert c.quality == "high" and c.cell == 0.25

    @pytest.mark.parametrize(
        "text",
        ["gamma=-1", "alpha=0", "quality=fancy", "solver=magic", "nonsense=1", "gamma", "seed=1.5", "pair_angle=95"],
    )
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            PipelineConfig.from_text(text)

    def test_comments_and_overrides(self):
        c = PipelineConfig.from_text("# a comment\n\ngamma = 20  # inline\n")
        assert c.gamma == 20.0
        assert c.with_overrides(gamma=None, beta=5.0) == PipelineConfig(gamma=20.0, beta=5.0)


class TestWorkers:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("MASSFIT_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("MASSFIT_THREADS", "0")
        assert worker_count() == 1
        monkeypatch.delenv("MASSFIT_THREADS")
        assert 1 <= worker_count() <= 8


class TestSynth:
    def test_clean_box_height(self):
        t = synth_generate(box_scene(sigma=0.0, dropout=0.0))
        assert t.mesh.vertices[:, 2].max() == 3.0
        assert t.mesh.vertices[:, 2].min() == 0.0

    def test_seeded(self):
        a, b = synth_generate(box_scene(), 5), synth_generate(box_scene(), 5)
        assert np.array_equal(a.mesh.vertices, b.mesh.vertices)
        assert np.array_equal(a.mesh.triangles, b.mesh.triangles)
        c = synth_generate(box_scene(), 6)
        assert not np.array_equal(a.mesh.vertices, c.mesh.vertices)

    def test_gable_ridge(self):
        sigma = 0.05
        clean = synth_generate(house_scene(sigma=0.0, dropout=0.0))
        noisy = synth_generate(house_scene(sigma=sigma, dropout=0.0))
        ridge = clean.mesh.vertices[:, 2] == clean.mesh.vertices[:, 2].max()
        assert clean.mesh.vertices[:, 2].max() == 6.0
        z = noisy.mesh.vertices[ridge, 2]
        assert ridge.sum() > 20
        assert abs(z.mean() - 6.0) < sigma
        assert np.all(np.abs(z - 6.0) < 6 * sigma)

    def test_floors_and_party_walls_hidden(self):
        t = synth_generate(terrace_scene(sigma=0.0, dropout=0.0))
        c = t.mesh.vertices[t.mesh.triangles].mean(axis=1)
        assert not np.any(c[:, 2] < 1e-9)
        # the shared wall at x = 6 is buried up to the lower roof, exposed above it
        on_wall = np.abs(c[:, 0] - 6.0) < 1e-9
        assert not np.any(on_wall & (c[:, 2] < 6.0))
        assert np.any(on_wall & (c[:, 2] > 6.0))

    def test_gis_merges_touching(self, get_scene):
        t = get_scene("terrace")
        assert len(t.footprints) == 2 and len(t.gis) == 1
        assert t.gis[0].area == pytest.approx(14 * 8)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(roof="dome"),
            dict(roof="gable", eaves=None),
            dict(roof="gable", eaves=4.0, height=3.0),
            dict(roof="mansard", eaves=1.0, break_height=0.5),
            dict(height=-1.0),
        ],
    )
    def test_bad_building(self, kw):
        with pytest.raises(ValueError):
            BuildingSpec.rect(0, 0, 4, 4, **kw)

    def test_bad_scene(self):
        with pytest.raises(ValueError):
            SceneSpec(())
        with pytest.raises(ValueError):
            SceneSpec((BuildingSpec.rect(0, 0, 4, 4), BuildingSpec.rect(2, 2, 6, 6)))
        with pytest.raises(ValueError):
            SceneSpec((BuildingSpec.rect(0, 0, 4, 4),), dropout=1.0)

    def test_scene_json_round_trip(self):
        s = SceneSpec(
            (
                BuildingSpec.rect(0, 0, 8, 6, roof="mansard", height=7.0, eaves=3.0, break_run=1.0, break_height=5.0),
                BuildingSpec.rect(8, 0, 12, 6, roof="hip", height=5.0, eaves=3.0),
            ),
            0.02,
            0.05,
            name="mixed",
        )
        assert SceneSpec.from_json(s.to_json()) == s

    @pytest.mark.parametrize("roof", ["mansard", "hip"])
    def test_other_roofs_extrude(self, roof):
        kw = dict(eaves=3.0, break_height=5.0) if roof == "mansard" else dict(eaves=3.0)
        s = SceneSpec((BuildingSpec.rect(0, 0, 8, 6, roof=roof, height=6.0, **kw),), 0.0, 0.0)
        t = synth_generate(s)
        m = t.models[0]
        assert check_closed_manifold(m.mesh.triangles)
        assert m.mesh.vertices[:, 2].max() == pytest.approx(6.0, abs=1e-9)
