import os
import xml.etree.ElementTree as ElementTree

import pytest

from test_config import STATIC_TEXT, TRACKING_TEXT

from dpopt.cli import main

PDOP_BLOCK = """
pdop.stepsize.form = geometric
pdop.stepsize.a = 0.02
pdop.stepsize.r = 0.995
pdop.noise.form = geometric
pdop.noise.a = 0.118619
pdop.noise.r = 0.999
"""


@pytest.fixture()
def static_cfg(tmp_path):
    path = tmp_path / "static.cfg"
    path.write_text(STATIC_TEXT + PDOP_BLOCK, encoding="utf-8")
    return str(path)


@pytest.fixture()
def tracking_cfg(tmp_path):
    path = tmp_path / "tracking.cfg"
    path.write_text(TRACKING_TEXT, encoding="utf-8")
    return str(path)


class TestValidate:
    def test_passing_config(self, static_cfg, capsys):
        assert main(["validate", static_cfg]) == 0
        out = capsys.readouterr().out
        assert "overall: pass" in out
        assert "coupling_sum_diverges" in out
        assert "symmetric" in out

    def test_failing_schedule_returns_one(self, tmp_path, capsys):
        text = STATIC_TEXT.replace("schedules.coupling.p = 0.9",
                                   "schedules.coupling.p = 1.1")
        path = tmp_path / "bad.cfg"
        path.write_text(text, encoding="utf-8")
        assert main(["validate", str(path)]) == 1
        out = capsys.readouterr().out
        assert "overall: FAIL" in out

    def test_missing_file_returns_two(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "nope.cfg")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_malformed_config_returns_two(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("variant = alg1\nwhat\n", encoding="utf-8")
        assert main(["validate", str(path)]) == 2


class TestRun:
    def test_writes_contracted_files(self, static_cfg, tmp_path, capsys):
        out = str(tmp_path / "out")
        code = main(["run", static_cfg, "--runs", "3", "--iters", "60",
                     "--output", out])
        assert code == 0
        names = sorted(os.listdir(out))
        assert names == [
            "aggregate.csv", "budget.csv", "failures.csv",
            "run_000.csv", "run_001.csv", "run_002.csv",
        ]
        stdout = capsys.readouterr().out
        assert "3/3 runs completed" in stdout
        assert "privacy budget bound" in stdout

    def test_plot_writes_svgs(self, static_cfg, tmp_path):
        out = str(tmp_path / "out")
        code = main(["run", static_cfg, "--runs", "2", "--iters", "60",
                     "--output", out, "--plot"])
        assert code == 0
        for name in ("gap.svg", "consensus.svg"):
            text = open(os.path.join(out, name), encoding="utf-8").read()
            ElementTree.fromstring(text)

    def test_tracking_plot_includes_tracking_svg(self, tracking_cfg, tmp_path):
        out = str(tmp_path / "out")
        code = main(["run", tracking_cfg, "--runs", "2", "--iters", "60",
                     "--output", out, "--plot"])
        assert code == 0
        assert os.path.exists(os.path.join(out, "tracking.svg"))

    def test_diverged_runs_recorded_not_written(self, tmp_path, capsys):
        text = STATIC_TEXT.replace("variant = alg1", "variant = dgd").replace(
            "schedules.stepsize.a = 0.02", "schedules.stepsize.a = 10.0"
        )
        path = tmp_path / "div.cfg"
        path.write_text(text, encoding="utf-8")
        out = str(tmp_path / "out")
        code = main(["run", str(path), "--runs", "2", "--iters", "300",
                     "--output", out])
        assert code == 0
        names = sorted(os.listdir(out))
        assert "run_000.csv" not in names
        lines = open(os.path.join(out, "failures.csv"),
                     encoding="utf-8").read().strip().split("\n")
        assert len(lines) == 3
        assert "2 diverged" in capsys.readouterr().out

    def test_validation_failure_returns_one_and_force_runs(self, tmp_path):
        text = STATIC_TEXT.replace("schedules.coupling.p = 0.9",
                                   "schedules.coupling.p = 1.1")
        path = tmp_path / "bad.cfg"
        path.write_text(text, encoding="utf-8")
        out = str(tmp_path / "out")
        assert main(["run", str(path), "--runs", "1", "--iters", "30",
                     "--output", out]) == 1
        assert main(["run", str(path), "--runs", "1", "--iters", "30",
                     "--output", out, "--force"]) == 0

    def test_bad_overrides_return_two(self, static_cfg, tmp_path):
        out = str(tmp_path / "out")
        assert main(["run", static_cfg, "--runs", "0", "--output", out]) == 2
        assert main(["run", static_cfg, "--iters", "0", "--output", out]) == 2


class TestBudget:
    def test_report_and_files(self, static_cfg, tmp_path, capsys):
        out = str(tmp_path / "out")
        code = main(["budget", static_cfg, "--horizons", "1e2,1e3",
                     "--output", out])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "envelope growth over the last decade" in stdout
        assert "summable" in stdout
        assert os.path.exists(os.path.join(out, "budget.csv"))
        assert os.path.exists(os.path.join(out, "breakdown.csv"))

    def test_divergent_series_message(self, tmp_path, capsys):
        text = STATIC_TEXT.replace("noise.scale.form = growing",
                                   "noise.scale.form = constant")
        text = text.replace("noise.scale.b = 0.1", "").replace(
            "noise.scale.p = 0.3", "")
        path = tmp_path / "flat.cfg"
        path.write_text(text, encoding="utf-8")
        out = str(tmp_path / "out")
        assert main(["budget", str(path), "--horizons", "100",
                     "--output", out]) == 0
        assert "no finite budget" in capsys.readouterr().out

    def test_zero_noise_rejected(self, tmp_path, capsys):
        text = STATIC_TEXT.replace("noise.scale.form = growing",
                                   "noise.scale.form = zero")
        text = text.replace("noise.scale.a = 1.0", "").replace(
            "noise.scale.b = 0.1", "").replace("noise.scale.p = 0.3", "")
        path = tmp_path / "quiet.cfg"
        path.write_text(text, encoding="utf-8")
        assert main(["budget", str(path), "--horizons", "100",
                     "--output", str(tmp_path / "out")]) == 2

    def test_bad_horizons_return_two(self, static_cfg, tmp_path):
        out = str(tmp_path / "out")
        assert main(["budget", static_cfg, "--horizons", "0",
                     "--output", out]) == 2
        assert main(["budget", static_cfg, "--horizons", "ten",
                     "--output", out]) == 2


class TestCompare:
    def test_writes_per_variant_dirs_and_summary(self, static_cfg, tmp_path,
                                                 capsys):
        out = str(tmp_path / "out")
        code = main(["compare", static_cfg, "--variants", "alg1,dgd,pdop_alg1",
                     "--runs", "2", "--iters", "60", "--output", out])
        assert code == 0
        for variant in ("alg1", "dgd", "pdop_alg1"):
            assert os.path.exists(os.path.join(out, variant, "aggregate.csv"))
        lines = open(os.path.join(out, "summary.csv"),
                     encoding="utf-8").read().strip().split("\n")
        assert lines[0].startswith("variant,runs,completed,failures")
        assert len(lines) == 4
        stdout = capsys.readouterr().out
        assert "alg1" in stdout and "dgd" in stdout

    def test_plot_overlays(self, static_cfg, tmp_path):
        out = str(tmp_path / "out")
        code = main(["compare", static_cfg, "--variants", "alg1,dgd",
                     "--runs", "2", "--iters", "60", "--output", out,
                     "--plot"])
        assert code == 0
        for name in ("compare_gap.svg", "compare_consensus.svg"):
            ElementTree.fromstring(
                open(os.path.join(out, name), encoding="utf-8").read()
            )

    def test_unknown_variant_returns_two(self, static_cfg, tmp_path):
        assert main(["compare", static_cfg, "--variants", "alg1,warp",
                     "--output", str(tmp_path / "out")]) == 2

    def test_missing_pdop_block_returns_two(self, tracking_cfg, tmp_path):
        assert main(["compare", tracking_cfg, "--variants", "pdop_push_pull",
                     "--runs", "1", "--iters", "30",
                     "--output", str(tmp_path / "out")]) == 2
