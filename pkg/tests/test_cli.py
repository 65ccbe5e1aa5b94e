"""Exit codes, file naming, and determinism of the command-line interface."""

import json

import numpy as np
import pytest

from peekmap.cli import run_cli

from conftest import build_bundle
from peekmap import save_bundle


@pytest.fixture
def metrics_files(tmp_path):
    sizes = {"img0": [100, 100], "img1": [100, 100]}
    (tmp_path / "sizes.json").write_text(json.dumps(sizes))
    gt_dir = tmp_path / "gt"
    det_dir = tmp_path / "det"
    gt_dir.mkdir()
    det_dir.mkdir()
    (gt_dir / "img0.txt").write_text("0 0.3 0.3 0.2 0.2\n1 0.7 0.7 0.2 0.2\n")
    (gt_dir / "img1.txt").write_text("0 0.5 0.5 0.4 0.4\n")
    (det_dir / "img0.txt").write_text(
        "0 0.9 0.3 0.3 0.2 0.2\n1 0.8 0.7 0.7 0.22 0.2\n0 0.3 0.1 0.1 0.1 0.1\n"
    )
    (det_dir / "img1.txt").write_text("0 0.85 0.5 0.52 0.4 0.4\n")
    return tmp_path


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert run_cli(["peek", "--frobnicate"]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_subcommand_is_usage_error(self):
        assert run_cli(["transmogrify"]) == 1

    def test_missing_bundle_is_data_error(self, tmp_path, capsys):
        code = run_cli(
            ["peek", "--bundle", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]
        )
        assert code == 2
        assert "manifest" in capsys.readouterr().err

    def test_bad_layer_index_names_it(self, bundle_dir, tmp_path, capsys):
        code = run_cli(
            [
                "peek",
                "--bundle",
                str(bundle_dir),
                "--layers",
                "99",
                "--out",
                str(tmp_path / "o"),
            ]
        )
        assert code == 2
        assert "99" in capsys.readouterr().err

    def test_alpha_out_of_range_is_usage_error(self, bundle_dir, tmp_path):
        code = run_cli(
            [
                "peek",
                "--bundle",
                str(bundle_dir),
                "--alpha",
                "1.5",
                "--out",
                str(tmp_path / "o"),
            ]
        )
        assert code == 1

    def test_bad_slice_is_data_error(self, bundle_dir, tmp_path, capsys):
        code = run_cli(
            [
                "features",
                "--bundle",
                str(bundle_dir),
                "--layers",
                "0",
                "--slices",
                "500",
                "--out",
                str(tmp_path / "o"),
            ]
        )
        assert code == 2
        assert "500" in capsys.readouterr().err


class TestOutputNaming:
    def test_peek_selected_layers(self, bundle_dir, tmp_path):
        out = tmp_path / "out"
        code = run_cli(
            [
                "peek",
                "--bundle",
                str(bundle_dir),
                "--layers",
                "0,2",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "layer_000_peek.png",
            "layer_002_peek.png",
        ]

    def test_eigencam_all_layers(self, bundle_dir, tmp_path):
        out = tmp_path / "out"
        assert run_cli(["eigencam", "--bundle", str(bundle_dir), "--out", str(out)]) == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "layer_000_eigencam.png",
            "layer_001_eigencam.png",
            "layer_002_eigencam.png",
        ]

    def test_compare_grids(self, bundle_dir, tmp_path):
        out = tmp_path / "out"
        code = run_cli(
            ["compare", "--bundle", str(bundle_dir), "--layers", "1", "--out", str(out)]
        )
        assert code == 0
        assert [p.name for p in out.iterdir()] == ["layer_001_compare.png"]

    def test_feature_dumps(self, bundle_dir, tmp_path):
        out = tmp_path / "out"
        code = run_cli(
            [
                "features",
                "--bundle",
                str(bundle_dir),
                "--layers",
                "1",
                "--slices",
                "0,3",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "layer_001_feature_000.png",
            "layer_001_feature_003.png",
        ]


class TestMetricsCommand:
    def test_json_report_and_table(self, metrics_files, capsys):
        out = metrics_files / "report.json"
        code = run_cli(
            [
                "metrics",
                "--gt",
                str(metrics_files / "gt"),
                "--det",
                str(metrics_files / "det"),
                "--sizes",
                str(metrics_files / "sizes.json"),
                "--iou",
                "0.5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["schema_version"] == 1
        assert "map_50" in payload
        assert payload["map_50"] is not None
        table = capsys.readouterr().out
        assert "mAP@0.5" in table

    def test_pr_figure_written(self, metrics_files):
        out = metrics_files / "report.json"
        figure = metrics_files / "pr.svg"
        code = run_cli(
            [
                "metrics",
                "--gt",
                str(metrics_files / "gt"),
                "--det",
                str(metrics_files / "det"),
                "--sizes",
                str(metrics_files / "sizes.json"),
                "--iou",
                "0.5",
                "--out",
                str(out),
                "--figure",
                str(figure),
            ]
        )
        assert code == 0
        assert figure.stat().st_size > 0


class TestBenchCommand:
    def test_csv_and_chart(self, bundle_dir, tmp_path):
        out = tmp_path / "bench"
        code = run_cli(
            [
                "bench",
                "--bundle",
                str(bundle_dir),
                "--out",
                str(out),
                "--repeats",
                "2",
                "--warmup",
                "0",
            ]
        )
        assert code == 0
        assert (out / "bench.csv").is_file()
        assert (out / "bench.svg").is_file()

    def test_no_chart_flag(self, bundle_dir, tmp_path):
        out = tmp_path / "bench"
        code = run_cli(
            [
                "bench",
                "--bundle",
                str(bundle_dir),
                "--out",
                str(out),
                "--repeats",
                "1",
                "--warmup",
                "0",
                "--no-chart",
            ]
        )
        assert code == 0
        assert not (out / "bench.svg").exists()


class TestDeterminismAndThreads:
    def run_peek(self, bundle_dir, out):
        return run_cli(
            [
                "peek",
                "--bundle",
                str(bundle_dir),
                "--out",
                str(out),
                "--global-norm",
            ]
        )

    def test_thread_count_does_not_change_bytes(
        self, bundle_dir, tmp_path, monkeypatch
    ):
        monkeypatch.setenv("PEEKMAP_THREADS", "1")
        assert self.run_peek(bundle_dir, tmp_path / "a") == 0
        monkeypatch.setenv("PEEKMAP_THREADS", "3")
        assert self.run_peek(bundle_dir, tmp_path / "b") == 0
        for path in sorted((tmp_path / "a").iterdir()):
            twin = tmp_path / "b" / path.name
            assert path.read_bytes() == twin.read_bytes()

    def test_invalid_thread_env_is_data_error(
        self, bundle_dir, tmp_path, monkeypatch, capsys
    ):
        monkeypatch.setenv("PEEKMAP_THREADS", "many")
        code = self.run_peek(bundle_dir, tmp_path / "o")
        assert code == 2
        assert "PEEKMAP_THREADS" in capsys.readouterr().err

    def test_negate_changes_overlay(self, bundle_dir, tmp_path):
        base = tmp_path / "base"
        flipped = tmp_path / "neg"
        run_cli(["peek", "--bundle", str(bundle_dir), "--layers", "0", "--out", str(base)])
        run_cli(
            [
                "peek",
                "--bundle",
                str(bundle_dir),
                "--layers",
                "0",
                "--negate",
                "--out",
                str(flipped),
            ]
        )
        a = (base / "layer_000_peek.png").read_bytes()
        b = (flipped / "layer_000_peek.png").read_bytes()
        assert a != b
