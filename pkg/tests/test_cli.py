import csv
import json

import pytest
import yaml
from click.testing import CliRunner

from spdcring import cli

TINY = {
    "n_k": 11, "n_k_pump": 21, "pump_energy_pJ": 0.0002, "energies_pJ": [0.0, 0.0001, 0.0002],
    "fock_cutoff": 5, "supermodes": [2, 1], "chi_points": 32, "wigner_points": 21,
    "n_singular": 5,
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


def _invoke(*args):
    return CliRunner().invoke(cli.main, [str(a) for a in args], catch_exceptions=False)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_squeeze_sweep_rows_and_manifest(tiny_config, tmp_path):
    out = tmp_path / "a"
    res = _invoke("squeeze-sweep", "--config", tiny_config, "--out", out)
    assert res.exit_code == 0, res.output
    assert "n_k: 11" in res.output  # resolved config is echoed
    rows = _rows(out / "squeeze_sweep.csv")
    assert len(rows) == 3
    assert float(rows[0]["squeezing_dB"]) == pytest.approx(0.0, abs=1e-9)
    assert float(rows[2]["squeezing_dB"]) < float(rows[1]["squeezing_dB"]) < 0
    manifest = json.loads((out / "squeeze_sweep_manifest.json").read_text())
    assert manifest["config"]["n_k"] == 11
    assert [o["file"] for o in manifest["outputs"]] == ["squeeze_sweep.csv"]


def test_outputs_are_deterministic(tiny_config, tmp_path):
    digests = []
    for name in ("a", "b"):
        _invoke("efficiency", "--config", tiny_config, "--out", tmp_path / name)
        m = json.loads((tmp_path / name / "efficiency_manifest.json").read_text())
        digests.append(m["outputs"])
    assert digests[0] == digests[1]


def test_zero_energy_row_is_zero(tiny_config, tmp_path):
    _invoke("efficiency", "--config", tiny_config, "--out", tmp_path, "--energies", "0")
    (row,) = _rows(tmp_path / "efficiency.csv")
    assert float(row["photon_number"]) == 0.0 and float(row["dyson_norm"]) == 0.0


def test_command_line_overrides_config(tiny_config, tmp_path):
    res = _invoke("supermodes", "--config", tiny_config, "--out", tmp_path, "--eta-s", "0.8",
                  "--eta-i", "0.8")
    assert res.exit_code == 0
    assert json.loads((tmp_path / "supermodes_manifest.json").read_text())["config"]["eta_signal"] == 0.8
    assert len(_rows(tmp_path / "supermodes.csv")) == 5


@pytest.mark.parametrize("args", [["--eta-s", "1.5"], ["--supermodes", "2"], ["--energies", "x"],
                                  ["--nk", "0"]])
def test_bad_configuration_exit_code(tiny_config, tmp_path, args):
    res = CliRunner().invoke(cli.main, ["squeeze-sweep", "--config", str(tiny_config),
                                        "--out", str(tmp_path)] + args)
    assert res.exit_code == cli.EXIT_CONFIG


def test_unknown_config_key(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("pump_energy: 1.0\n")
    res = CliRunner().invoke(cli.main, ["efficiency", "--config", str(path), "--out", str(tmp_path)])
    assert res.exit_code == cli.EXIT_CONFIG


def test_truncation_budget_is_config_error(tiny_config, tmp_path):
    res = CliRunner().invoke(cli.main, ["nongauss", "--config", str(tiny_config), "--out",
                                        str(tmp_path), "--supermodes", "6,3", "--fock-cutoff", "30"])
    assert res.exit_code == cli.EXIT_CONFIG


def test_wigner_and_stretch_outputs(tiny_config, tmp_path):
    res = _invoke("wigner", "--config", tiny_config, "--out", tmp_path, "--scan", "2,2")
    assert res.exit_code == 0, res.output
    names = {"wigner_hybrid.csv", "wigner_signal_idler.csv", "wigner_reduced_exact.csv",
             "wigner_reduced_approx.csv", "angle_scan.csv"}
    assert names <= {p.name for p in tmp_path.iterdir()}
    assert len(_rows(tmp_path / "wigner_hybrid.csv")) == 21 * 21
    res = _invoke("stretch", "--config", tiny_config, "--out", tmp_path)
    assert res.exit_code == 0, res.output
    diag = {r["quantity"]: r["value"] for r in _rows(tmp_path / "stretch_diagnostics.csv")}
    assert diag["reference"] == "lossless"


def test_figures_flag(tiny_config, tmp_path):
    pytest.importorskip("matplotlib")
    _invoke("efficiency", "--config", tiny_config, "--out", tmp_path, "--figures")
    assert (tmp_path / "efficiency.png").exists()
