import json
import os

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

import run_spectral_factors
import specfactors.io_utils as io_utils
import specfactors.statespace as ss
from specfactors.statespace import Realization

from conftest import make_w_minus

EXAMPLE_MODEL = io_utils.get_path(io_utils.EXAMPLE_ASSET_PATH_DICT["w_minus"])
W_BAR_MINUS = io_utils.get_path(io_utils.EXAMPLE_ASSET_PATH_DICT["w_bar_minus"])


def write_model(tmp_path, r: Realization, name: str) -> str:
    path = str(tmp_path / f"{name}.json")
    io_utils.save_model(io_utils.ModelFile.from_realization(r, name=name), path)
    return path


def write_specs(tmp_path, entries: list[dict]) -> str:
    path = tmp_path / "specs.json"
    path.write_text(json.dumps({"specs": entries}))
    return str(path)


class TestAnalyze:

    def test_example(self, tmp_path, capsys):
        out = str(tmp_path / "report.json")
        assert run_spectral_factors.main(["analyze", EXAMPLE_MODEL, "-o", out]) == 0
        report = io_utils.load_json(out)
        assert_allclose(report["t"]["D"], np.diag([0.5, 2 / 3]), atol=1e-12)
        assert_allclose(report["X"], np.diag([-1 / 15, -1 / 32]), atol=1e-12)
        assert_allclose(report["Z"], 4 / 3 * np.eye(2), atol=1e-10)
        assert max(report["gramian_residuals"].values()) <= 1e-12
        assert "Verdict: pass" in capsys.readouterr().out

    def test_constant_model(self, tmp_path):
        path = write_model(tmp_path, Realization.constant(2 * np.eye(2)), "constant")
        assert run_spectral_factors.main(["analyze", path]) == 0

    def test_not_outer(self, tmp_path, capsys):
        path = write_model(tmp_path, Realization(a=[[1.2]], b=[[1.0]], c=[[-1.0]], d=[[1.0]]), "unstable")
        assert run_spectral_factors.main(["analyze", path]) == 2
        assert "not outer" in capsys.readouterr().err

    def test_improper_needs_moebius(self, tmp_path):
        path = write_model(tmp_path, Realization(a=[[0.0]], b=[[1.0]], c=[[-0.5]], d=[[1.0]]), "improper")
        assert run_spectral_factors.main(["analyze", path]) == 2
        assert run_spectral_factors.main(["analyze", path, "--moebius"]) == 0
        assert run_spectral_factors.main(["analyze", path, "--moebius", "0.2"]) == 0

    def test_parse_error(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"A": [[0.5]]')
        assert run_spectral_factors.main(["analyze", str(path)]) == 3
        assert "Error" in capsys.readouterr().err


class TestFactors:

    def test_whole_a_block(self, tmp_path):
        out_dir = str(tmp_path / "factors")
        specs = write_specs(tmp_path, [{"a_select": "all"}])
        assert run_spectral_factors.main(["factors", EXAMPLE_MODEL, specs, "-d", out_dir]) == 0
        factor = io_utils.load_model(os.path.join(out_dir, "factor_000.json")).to_realization()
        assert_allclose(ss.poles_zeros(factor).poles, [2.0, 2.0], atol=1e-10)
        summary = pd.read_csv(os.path.join(out_dir, "summary.csv"))
        assert list(summary.columns) == run_spectral_factors.SUMMARY_COLUMNS
        assert summary["verdict"].tolist() == ["pass"]

    def test_theta_grid(self, tmp_path):
        out_dir = str(tmp_path / "factors")
        specs = write_specs(tmp_path, [{"a_select": [0], "theta_grid": 4}])
        assert run_spectral_factors.main(["factors", EXAMPLE_MODEL, specs, "-d", out_dir]) == 0
        summary = pd.read_csv(os.path.join(out_dir, "summary.csv"))
        assert len(summary) == 4
        assert summary["degree"].tolist() == [2, 2, 2, 2]
        assert summary["divisor_degree"].tolist() == [1, 1, 1, 1]

    def test_empty_specs(self, tmp_path):
        out_dir = str(tmp_path / "factors")
        specs = write_specs(tmp_path, [])
        assert run_spectral_factors.main(["factors", EXAMPLE_MODEL, specs, "-d", out_dir]) == 0
        assert len(pd.read_csv(os.path.join(out_dir, "summary.csv"))) == 0

    def test_invalid_subspace(self, tmp_path):
        specs = write_specs(tmp_path, [{"gamma_basis": [[1.0], [1.0]]}])
        assert run_spectral_factors.main(["factors", EXAMPLE_MODEL, specs, "-d", str(tmp_path)]) == 2

    def test_bad_spec_file(self, tmp_path):
        specs = write_specs(tmp_path, [{"a_select": [0], "a_basis": [[1.0], [0.0]]}])
        assert run_spectral_factors.main(["factors", EXAMPLE_MODEL, specs, "-d", str(tmp_path)]) == 3


class TestVerify:

    def test_w_bar_minus(self, capsys):
        assert run_spectral_factors.main(["verify", EXAMPLE_MODEL, W_BAR_MINUS]) == 0
        out = capsys.readouterr().out
        assert "Verdict: pass" in out
        assert "2 + 2 = 4" in out

    def test_self(self):
        assert run_spectral_factors.main(["verify", EXAMPLE_MODEL, EXAMPLE_MODEL]) == 0

    def test_scaled_candidate(self, tmp_path, capsys):
        scaled = ss.series(make_w_minus(), Realization.constant(2 * np.eye(2)))
        path = write_model(tmp_path, scaled, "scaled")
        assert run_spectral_factors.main(["verify", EXAMPLE_MODEL, path]) == 1
        assert "Verdict: fail" in capsys.readouterr().out


class TestSpectrum:

    def test_example(self, tmp_path):
        out = tmp_path / "phi.csv"
        assert run_spectral_factors.main(["spectrum", EXAMPLE_MODEL, "-n", "8", "-o", str(out)]) == 0
        assert b"\r" not in out.read_bytes()
        table = pd.read_csv(out)
        assert list(table.columns) == ["theta", "phi_1_1", "phi_1_2_re", "phi_1_2_im", "phi_2_2"]
        assert len(table) == 8
        assert table["phi_1_1"][0] == pytest.approx(2.25, abs=1e-12)
        assert table["phi_2_2"][0] == pytest.approx(16 / 9, abs=1e-12)

    def test_single_sample(self, capsys):
        assert run_spectral_factors.main(["spectrum", EXAMPLE_MODEL, "-n", "1"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 2
        assert lines[1].startswith("0.0,")

    def test_all_pass_input(self, tmp_path):
        rotation = Realization.constant([[0.6, -0.8], [0.8, 0.6]])
        out = tmp_path / "phi.csv"
        assert run_spectral_factors.main(["spectrum", write_model(tmp_path, rotation, "rotation"), "-o", str(out)]) == 0
        table = pd.read_csv(out)
        assert_allclose(table["phi_1_1"], 1.0, atol=1e-15)
        assert_allclose(table["phi_2_2"], 1.0, atol=1e-15)
        assert_allclose(table["phi_1_2_re"], 0.0, atol=1e-15)


def test_example_command(capsys):
    assert run_spectral_factors.main(["example"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "conjugate phase A" in out
    assert "P for class two" in out
    assert "diag(-1/15, -1/32)" in out
