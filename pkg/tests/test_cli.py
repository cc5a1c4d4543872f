import json
from pathlib import Path

import numpy as np
import pytest

from rssloc import cli, read_pgm
from rssloc.dataset_io import predictions_to_csv, read_dataset_index
from rssloc.render import encode_ppm, render_map


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    base = tmp_path_factory.mktemp("cliws")
    config = {
        "width": 80, "height": 80, "n_layouts": 2, "n_buildings": 3,
        "source_counts": [1, 2], "placements_per_count": 1,
        "intervals": [4, 10], "seed": 424,
        "split": {"train": 1, "val": 0, "test": 1},
    }
    cfg = base / "config.json"
    cfg.write_text(json.dumps(config))
    out = base / "ds"
    assert cli.main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
    return base, cfg, out


class TestGenerate:
    def test_dataset_structure(self, dataset):
        _, _, out = dataset
        index = read_dataset_index(out)
        assert len(index["entries"]) == 4
        for sub in ("layouts", "scenarios", "maps/global", "maps/local", "samples"):
            assert (out / sub).exists()

    def test_missing_config_no_partial_output(self, tmp_path):
        out = tmp_path / "never"
        code = cli.main(["generate", "--config", str(tmp_path / "nope.json"),
                         "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_bad_json_config(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        assert cli.main(["generate", "--config", str(cfg),
                         "--out", str(tmp_path / "o")]) == 2

    def test_seed_override_changes_bytes(self, dataset, tmp_path):
        _, cfg, out = dataset
        out2 = tmp_path / "ds2"
        assert cli.main(["generate", "--config", str(cfg), "--out", str(out2),
                         "--seed", "99"]) == 0
        a = sorted(p.name for p in (out / "maps" / "local").iterdir())
        b = sorted(p.name for p in (out2 / "maps" / "local").iterdir())
        assert a == b  # same structure
        assert any((out / "maps" / "local" / n).read_bytes()
                   != (out2 / "maps" / "local" / n).read_bytes() for n in a)


class TestPipeline:
    def test_oracle_run_ideal_rates(self, dataset, tmp_path):
        _, _, out = dataset
        run = tmp_path / "run"
        code = cli.main(["pipeline", "--dataset", str(out), "--out", str(run),
                         "--reconstructor", "oracle", "--estimator", "com",
                         "--intervals", "4"])
        assert code == 0
        report = json.loads((run / "report.json").read_text())
        assert report["aggregate"]["far"] == 0.0
        assert report["aggregate"]["mdr"] == 0.0
        assert report["aggregate"]["mle"] <= 1.0
        assert (run / "predictions").is_dir()

    def test_unknown_estimator_fails_before_processing(self, dataset, tmp_path):
        _, _, out = dataset
        run = tmp_path / "run"
        code = cli.main(["pipeline", "--dataset", str(out), "--out", str(run),
                         "--estimator", "resnet"])
        assert code == 1
        assert not run.exists()

    def test_help_lists_registries(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["pipeline", "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for name in ("oracle", "idw", "kriging", "argmax", "com", "refine4"):
            assert name in text

    def test_missing_dataset_is_data_error(self, tmp_path):
        code = cli.main(["pipeline", "--dataset", str(tmp_path / "nope"),
                         "--out", str(tmp_path / "o")])
        assert code == 2

    def test_partial_failure_exit_code(self, dataset, tmp_path):
        _, _, out = dataset
        # external local-map dir with files for only some scenarios
        ext = tmp_path / "ext"
        ext.mkdir()
        index = read_dataset_index(out)
        first = index["entries"][0]
        src = read_pgm(out / first["local_map"])
        from rssloc.dataset_io import write_pgm
        write_pgm(ext / f"{first['id']}.pgm", src)
        run = tmp_path / "run"
        code = cli.main(["pipeline", "--dataset", str(out), "--out", str(run),
                         "--local-map-dir", str(ext), "--intervals", "4"])
        assert code == 3
        report = json.loads((run / "report.json").read_text())
        assert report["errors"]
        ok = [r for r in report["results"] if "error" not in r]
        assert len(ok) == 1 and ok[0]["id"] == first["id"]

    def test_local_map_drop_in_matches_oracle(self, dataset, tmp_path):
        _, _, out = dataset
        ext = tmp_path / "ext"
        ext.mkdir()
        index = read_dataset_index(out)
        from rssloc.dataset_io import write_pgm
        for entry in index["entries"]:
            write_pgm(ext / f"{entry['id']}.pgm", read_pgm(out / entry["local_map"]))
        run_a = tmp_path / "a"
        run_b = tmp_path / "b"
        assert cli.main(["pipeline", "--dataset", str(out), "--out", str(run_a),
                         "--local-map-dir", str(ext), "--intervals", "4"]) == 0
        assert cli.main(["pipeline", "--dataset", str(out), "--out", str(run_b),
                         "--reconstructor", "oracle", "--intervals", "4"]) == 0
        ra = json.loads((run_a / "report.json").read_text())["results"]
        rb = json.loads((run_b / "report.json").read_text())["results"]
        assert ra == rb

    def test_jobs_parallel_matches_serial(self, dataset, tmp_path):
        _, _, out = dataset
        run_a = tmp_path / "s"
        run_b = tmp_path / "p"
        assert cli.main(["pipeline", "--dataset", str(out), "--out", str(run_a),
                         "--intervals", "4"]) == 0
        assert cli.main(["pipeline", "--dataset", str(out), "--out", str(run_b),
                         "--intervals", "4", "--jobs", "2"]) == 0
        ra = json.loads((run_a / "report.json").read_text())
        rb = json.loads((run_b / "report.json").read_text())
        assert ra["results"] == rb["results"]
        assert ra["aggregate"] == rb["aggregate"]


class TestEvaluate:
    def test_external_coordinates(self, dataset, tmp_path):
        _, _, out = dataset
        index = read_dataset_index(out)
        preds = tmp_path / "preds"
        preds.mkdir()
        for entry in index["entries"]:
            doc = json.loads((out / entry["scenario"]).read_text())
            pts = [(s["x"], s["y"]) for s in doc["sources"]]
            (preds / f"{entry['id']}_4.csv").write_text(
                predictions_to_csv(range(1, len(pts) + 1), pts,
                                   [False] * len(pts)))
        report_path = tmp_path / "eval.json"
        code = cli.main(["evaluate", "--dataset", str(out),
                         "--predictions", str(preds), "--out", str(report_path)])
        assert code == 0
        report = json.loads(report_path.read_text())
        # coordinates round-trip through 6-decimal CSV
        assert report["aggregate"]["mle"] <= 1e-5
        assert report["aggregate"]["far"] == 0.0

    def test_empty_predictions_dir(self, dataset, tmp_path):
        _, _, out = dataset
        empty = tmp_path / "empty"
        empty.mkdir()
        assert cli.main(["evaluate", "--dataset", str(out),
                         "--predictions", str(empty)]) == 2


class TestRender:
    def test_deterministic_bytes(self, dataset, tmp_path):
        _, _, out = dataset
        index = read_dataset_index(out)
        entry = index["entries"][0]
        args = ["render", "--map", str(out / entry["local_map"]),
                "--layout", str(out / entry["layout"]),
                "--scenario", str(out / entry["scenario"])]
        assert cli.main(args + ["--out", str(tmp_path / "a.ppm")]) == 0
        assert cli.main(args + ["--out", str(tmp_path / "b.ppm")]) == 0
        assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()
        assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n80 80\n255\n")

    def test_dimension_mismatch(self, dataset, tmp_path):
        _, _, out = dataset
        index = read_dataset_index(out)
        entry = index["entries"][0]
        from rssloc.dataset_io import write_pgm
        write_pgm(tmp_path / "small.pgm", np.zeros((10, 10), dtype=np.uint8))
        code = cli.main(["render", "--map", str(tmp_path / "small.pgm"),
                         "--layout", str(out / entry["layout"]),
                         "--out", str(tmp_path / "x.ppm")])
        assert code == 2

    def test_corner_marker_clipped(self):
        rgb = render_map(np.zeros((20, 20), dtype=np.uint8),
                         np.zeros((20, 20), dtype=np.uint8),
                         truths=[(0.2, 0.2), (19.9, 19.9)])
        assert rgb.shape == (20, 20, 3)
        assert tuple(rgb[0, 0]) == (0, 230, 0)

    def test_empty_predictions_renders(self):
        rgb = render_map(np.zeros((10, 10), dtype=np.uint8),
                         np.zeros((10, 10), dtype=np.uint8))
        data = encode_ppm(rgb)
        assert len(data) == len(b"P6\n10 10\n255\n") + 300


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["pipeline"])  # missing required arguments
    assert exc.value.code == 1
