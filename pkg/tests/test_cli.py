"""Tests for the CLI module."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from aci_workbench.algebra import MultiPoly
from aci_workbench.cli import main


@pytest.fixture
def curve_file(tmp_path: Path) -> Path:
    """Create a curve file for y^2 = x^6 - 1."""
    file_path = tmp_path / "sextic.json"
    file_path.write_text(json.dumps(MultiPoly.from_expr("x**6 - 1", ("x",)).to_json()))
    return file_path


@pytest.fixture
def samples_file(tmp_path: Path) -> Path:
    """Create samples on beta^2 = alpha^3 - alpha."""
    rng = np.random.default_rng(11)
    x = rng.normal(size=20) + 1j * rng.normal(size=20)
    y = np.sqrt(x**3 - x)
    rows = np.column_stack([x.real, x.imag, y.real, y.imag])
    file_path = tmp_path / "samples.csv"
    np.savetxt(file_path, rows, delimiter=",", header="alpha_re,alpha_im,beta_re,beta_im", comments="")
    return file_path


class TestCli:
    """Tests for CLI main function."""

    def test_list(self, capsys: pytest.CaptureFixture[str]) -> None:
        """list prints the registry."""
        assert main(["list"]) == 0
        output = capsys.readouterr().out
        assert "henon-heiles" in output
        assert "clebsch" in output

    def test_periods_then_prym(self, curve_file: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """A stored period matrix feeds the prym command."""
        stored = tmp_path / "periods.json"
        assert main(["periods", str(curve_file), "--out", str(stored)]) == 0
        assert json.loads(stored.read_text())["exponents"] == [0, 1]
        capsys.readouterr()

        exit_code = main(["prym", str(stored), "--involution", "x=-1", "--json"])

        assert exit_code == 0
        parsed = json.loads(capsys.readouterr().out)
        assert parsed["stages"][0]["data"]["intersection_count"] == 4

    def test_file_not_found_returns_one(self, tmp_path: Path) -> None:
        """Missing file should return exit code 1."""
        assert main(["periods", str(tmp_path / "missing.json")]) == 1

    def test_bad_involution(self, curve_file: Path, tmp_path: Path) -> None:
        """An unsupported involution is an error."""
        stored = tmp_path / "periods.json"
        main(["periods", str(curve_file), "--out", str(stored)])
        assert main(["prym", str(stored), "--involution", "x=2"]) == 1

    def test_fit_json_output(self, samples_file: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """--json flag should output JSON."""
        assert main(["fit", str(samples_file), "--degree", "3", "--json"]) == 0
        parsed = json.loads(capsys.readouterr().out)
        assert parsed["system"] == "samples"
        assert parsed["stages"][0]["data"]["fit"]["exact"]

    def test_fit_bidegree_length(self, samples_file: Path) -> None:
        """--bidegree needs one bound per column."""
        assert main(["fit", str(samples_file), "--bidegree", "3,2,1"]) == 1

    def test_integrate_writes_csv(self, tmp_path: Path) -> None:
        """integrate --out writes the trajectory table."""
        out = tmp_path / "run"
        exit_code = main(["integrate", "henon-heiles", "--x0", "0.1,0,0,0.1", "--t", "0.5", "--step", "0.05",
                          "--out", str(out)])
        assert exit_code == 0
        assert (out / "henon-heiles_trajectory.csv").exists()

    def test_integrate_bad_state(self) -> None:
        """Unparseable initial states return exit code 1."""
        assert main(["integrate", "henon-heiles", "--x0", "a,b"]) == 1

    def test_analyze_config_mismatch(self, tmp_path: Path) -> None:
        """The config must name the same system."""
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"system": "clebsch"}))
        assert main(["analyze", "henon-heiles", "--config", str(config)]) == 1

    def test_analyze_unknown_system(self, capsys: pytest.CaptureFixture[str]) -> None:
        """An unknown system fails with a report, not a traceback."""
        assert main(["analyze", "toda"]) == 1
        assert "FAILED" in capsys.readouterr().out
