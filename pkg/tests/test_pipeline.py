import json

import numpy as np
import pytest
from click.testing import CliRunner

from reefseg.cli import main
from reefseg.errors import ConfigError
from reefseg.pipeline import (
    config_from_dict,
    labelmap_from_raster,
    labelmap_to_raster,
    run_clustering,
    run_pipeline,
    validate_config,
)
from reefseg.raster import load_bnd, load_png, render_labels, save_bnd, save_png
from reefseg.refine import legend_from_json
from reefseg.labelmap import LabelMap
from reefseg.synthetic import make_reef_scene


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    mosaic, bathy = make_reef_scene()
    save_png(mosaic, out / "mosaic.png")
    save_bnd(bathy, out / "bathymetry.bnd")
    return out


def benthic_config(scene_dir, **overrides):
    cfg = {
        "mode": "benthic",
        "inputs": {"mosaic": str(scene_dir / "mosaic.png")},
        "method": "kmeans",
        "k": 4,
        "refinement": {"min_size": 25},
        "seed": 3,
    }
    cfg.update(overrides)
    return cfg


class TestValidateConfig:
    def test_minimal_valid_config_echoes_defaults(self, scene_dir):
        cfg = validate_config(json.dumps(benthic_config(scene_dir)))
        assert cfg.normalization == "minmax"
        assert cfg.agnes.downsample_factor == 5
        assert cfg.refinement.connectivity == 8
        assert cfg.refinement.min_size == 25

    def test_geomorphic_without_bathymetry(self, scene_dir):
        raw = benthic_config(scene_dir)
        raw["mode"] = "geomorphic"
        with pytest.raises(ConfigError, match="bathymetry"):
            validate_config(json.dumps(raw))

    def test_dbscan_with_k_conflicts(self, scene_dir):
        raw = benthic_config(scene_dir, method="dbscan")
        with pytest.raises(ConfigError, match="dbscan"):
            validate_config(json.dumps(raw))

    def test_all_errors_reported(self):
        raw = {"mode": "nope", "method": "what", "inputs": {}}
        with pytest.raises(ConfigError) as info:
            config_from_dict(raw)
        text = " | ".join(info.value.problems)
        assert "mode" in text and "method" in text and "mosaic" in text
        assert len(info.value.problems) >= 3

    def test_syntax_error_reports_position(self):
        with pytest.raises(ConfigError, match="line 1"):
            validate_config("{not json")

    def test_missing_k_for_kmeans(self, scene_dir):
        raw = benthic_config(scene_dir)
        del raw["k"]
        with pytest.raises(ConfigError, match="requires k"):
            validate_config(json.dumps(raw))


class TestLabelRoundTrip:
    def test_labelmap_raster_round_trip(self):
        lm = LabelMap(3, 2, np.array([[0, -1, 2], [5, -2, 1]], dtype=np.int32))
        back = labelmap_from_raster(labelmap_to_raster(lm))
        assert np.array_equal(back.labels, lm.labels)


class TestRunPipeline:
    def test_benthic_kmeans_run(self, scene_dir, tmp_path):
        cfg = config_from_dict(benthic_config(scene_dir))
        art = run_pipeline(cfg, tmp_path)
        assert art.map_png.exists()
        labels = labelmap_from_raster(load_bnd(art.labels_bnd))
        assert labels.width == 128
        legend = legend_from_json(art.legend_json.read_text())
        assert len(legend) == len(labels.present_labels())
        prov = json.loads(art.provenance_json.read_text())
        assert prov["seed"] == 3
        assert "fit" in prov["timings"]
        assert prov["config"]["method"] == "kmeans"

    def test_determinism_byte_identical(self, scene_dir, tmp_path):
        cfg = config_from_dict(benthic_config(scene_dir))
        a = run_pipeline(cfg, tmp_path / "a")
        b = run_pipeline(cfg, tmp_path / "b")
        assert a.labels_bnd.read_bytes() == b.labels_bnd.read_bytes()
        assert a.map_png.read_bytes() == b.map_png.read_bytes()

    def test_png_matches_bnd_through_legend(self, scene_dir, tmp_path):
        # Rendering the BND labels through the legend must reproduce
        # the shipped PNG byte-for-byte.
        from reefseg.raster import png_bytes
        from reefseg.raster import Palette, PaletteEntry

        cfg = config_from_dict(benthic_config(scene_dir))
        art = run_pipeline(cfg, tmp_path)
        labels = labelmap_from_raster(load_bnd(art.labels_bnd))
        legend = legend_from_json(art.legend_json.read_text())
        palette = Palette([PaletteEntry(e.label, e.color, e.name) for e in legend])
        rendered = render_labels(labels, palette)
        assert png_bytes(rendered) == art.map_png.read_bytes()

    def test_geomorphic_needs_stack(self, scene_dir, tmp_path):
        raw = benthic_config(scene_dir, mode="geomorphic", k=5)
        raw["inputs"]["bathymetry"] = str(scene_dir / "bathymetry.bnd")
        cfg = config_from_dict(raw)
        run = run_clustering(cfg)
        assert run.working.bands == 4

    def test_agnes_cap_refusal_and_downsample(self, scene_dir, tmp_path):
        raw = benthic_config(scene_dir, method="agnes", k=3)
        raw["agnes"] = {"downsample_factor": 1, "max_samples": 2000}
        with pytest.raises(Exception, match="cap"):
            run_clustering(config_from_dict(raw))
        raw["agnes"]["downsample_factor"] = 5
        run = run_clustering(config_from_dict(raw))
        assert run.working.width == 26  # ceil(128 / 5)
        assert len(set(run.labels.tolist())) == 3

    def test_dbscan_auto_params(self, scene_dir):
        raw = benthic_config(scene_dir, method="dbscan")
        del raw["k"]
        cfg = config_from_dict(raw)
        run = run_clustering(cfg)
        assert run.metrics["eps"] > 0
        assert run.metrics["min_pts"] == 6  # 2 * d for RGB
        assert run.metrics["n_clusters"] >= 1

    def test_custom_legend_entries(self, scene_dir, tmp_path):
        raw = benthic_config(scene_dir, k=2)
        raw["legend"] = [
            {"label": 0, "class": "water", "color": "#0000FF"},
            {"label": 1, "class": "land", "color": [0, 255, 0]},
        ]
        raw["refinement"] = {"min_size": 1}
        cfg = config_from_dict(raw)
        art = run_pipeline(cfg, tmp_path)
        legend = legend_from_json(art.legend_json.read_text())
        assert [e.name for e in legend] == ["water", "land"]


class TestCli:
    def write_config(self, tmp_path, raw):
        p = tmp_path / "config.json"
        p.write_text(json.dumps(raw))
        return p

    def test_validate_ok(self, scene_dir, tmp_path):
        p = self.write_config(tmp_path, benthic_config(scene_dir))
        result = CliRunner().invoke(main, ["validate", "--config", str(p)])
        assert result.exit_code == 0
        assert "config ok" in result.output

    def test_validate_reports_all_problems(self, tmp_path):
        p = self.write_config(tmp_path, {"mode": "x", "method": "y", "inputs": {}})
        result = CliRunner().invoke(main, ["validate", "--config", str(p)])
        assert result.exit_code == 2
        assert result.output.count("config error:") >= 3

    def test_run_writes_artifacts(self, scene_dir, tmp_path):
        p = self.write_config(tmp_path, benthic_config(scene_dir, k=3))
        out = tmp_path / "out"
        result = CliRunner().invoke(
            main, ["run", "--config", str(p), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert (out / "labels.bnd").exists()

    def test_run_missing_input_is_data_error(self, tmp_path):
        raw = {
            "mode": "benthic",
            "inputs": {"mosaic": str(tmp_path / "missing.png")},
            "method": "kmeans",
            "k": 2,
        }
        p = self.write_config(tmp_path, raw)
        result = CliRunner().invoke(main, ["run", "--config", str(p)])
        assert result.exit_code == 3

    def test_seed_override(self, scene_dir, tmp_path):
        p = self.write_config(tmp_path, benthic_config(scene_dir, k=3))
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        r1 = CliRunner().invoke(
            main, ["run", "--config", str(p), "--out", str(out_a), "--seed", "11"]
        )
        r2 = CliRunner().invoke(
            main, ["run", "--config", str(p), "--out", str(out_b), "--seed", "11"]
        )
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert (out_a / "labels.bnd").read_bytes() == (out_b / "labels.bnd").read_bytes()
        prov = json.loads((out_a / "provenance.json").read_text())
        assert prov["seed"] == 11

    def test_curves_csv(self, scene_dir, tmp_path):
        p = self.write_config(tmp_path, benthic_config(scene_dir, k=3))
        out = tmp_path / "curve.csv"
        result = CliRunner().invoke(
            main,
            ["curves", "--config", str(p), "--k-min", "1", "--k-max", "4", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0] == "k,score"
        assert len(lines) == 5
        scores = [float(line.split(",")[1]) for line in lines[1:]]
        assert all(b <= a + 1e-12 for a, b in zip(scores, scores[1:]))

    def test_demo_data(self, tmp_path):
        result = CliRunner().invoke(main, ["demo-data", "--out", str(tmp_path / "d")])
        assert result.exit_code == 0
        r = load_png(tmp_path / "d" / "mosaic.png")
        assert (r.width, r.height) == (128, 128)
        assert not r.mask.all()  # the nodata notch survived the PNG trip
