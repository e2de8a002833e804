import json

import pytest

from instance import read_instance
from main import main, parse_n_range


def test_help_and_usage_errors(capsys):
    assert main(["--help"]) == 0
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["spectrum", "--n", "four"]) == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("text,expected", [
    ("5..8", [5, 6, 7, 8]),
    ("8..14:2", [8, 10, 12, 14]),
    ("9,7", [9, 7]),
])
def test_n_ranges(text, expected):
    assert parse_n_range(text) == expected


def test_gen_then_spectrum_is_reproducible(tmp_path):
    inst_path = tmp_path / "inst.json"
    assert main(["gen", "--n", "6", "--d", "0.3", "--seed", "4", "--out", str(inst_path)]) == 0
    inst = read_instance(inst_path)
    assert (inst.n, inst.seed) == (6, 4)

    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["spectrum", "--in", str(inst_path), "--out", str(first)]) == 0
    assert main(["spectrum", "--in", str(inst_path), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    report = json.loads(first.read_text())
    assert report["instance"] == inst.digest()
    assert report["seed"] == 4
    assert report["degeneracy"] >= 2


def test_spectrum_methods_agree(tmp_path):
    reports = {}
    for method in ("full", "components", "dense"):
        out = tmp_path / f"{method}.json"
        assert main(["spectrum", "--n", "7", "--d", "0.3", "--seed", "2", "--method", method, "--out", str(out)]) == 0
        reports[method] = json.loads(out.read_text())
    assert reports["full"]["degeneracy"] == reports["components"]["degeneracy"] == reports["dense"]["degeneracy"]
    if reports["full"]["gap_delta"] is not None:
        assert reports["components"]["gap_delta"] == pytest.approx(reports["full"]["gap_delta"], abs=1e-9)


def test_instance_source_conflict(tmp_path):
    inst_path = tmp_path / "inst.json"
    assert main(["gen", "--n", "4", "--out", str(inst_path)]) == 0
    assert main(["spectrum", "--in", str(inst_path), "--n", "4"]) == 1


def test_bad_parameters_exit_one(tmp_path):
    assert main(["gen", "--n", "1", "--out", str(tmp_path / "x.json")]) == 1
    assert main(["spectrum", "--in", str(tmp_path / "missing.json")]) == 1
    assert main(["gen", "--n", "5", "--d", "1.5", "--out", str(tmp_path / "y.json")]) == 1


def test_numerical_failure_exits_two(tmp_path):
    # three RK4 steps over T = 50 cannot hold the norm
    args = ["evolve", "--n", "4", "--d", "1.0", "--time", "50", "--steps", "3", "--out", str(tmp_path / "e.json")]
    assert main(args) == 2


def test_evolve_report(tmp_path):
    out = tmp_path / "evolve.json"
    assert main(["evolve", "--n", "5", "--d", "0.3", "--seed", "1", "--frame", "rotating",
                 "--checkpoints", "3", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["frame"] == "rotating"
    assert len(report["checkpoints"]) == 3
    assert "wall_time_ms" not in report


def test_holonomy_report(tmp_path):
    out = tmp_path / "holonomy.json"
    assert main(["holonomy", "--n", "3", "--d", "0.6", "--seed", "1", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["T"] == 1000.0
    assert report["unitarity_defect"] < 1e-10
    assert report["fidelity_vs_evolution"] >= 0.999


def test_chain_outputs(tmp_path):
    assert main(["chain", "--n", "4..8:2", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "chain_gaps.csv").read_text().splitlines()
    assert lines[0] == "n,beta,boundary,gap"
    assert len(lines) == 4
    assert json.loads((tmp_path / "chain_fit.json").read_text())["boundary"] == "periodic"


def test_scaling_outputs_are_reproducible(tmp_path):
    runs = []
    for name in ("one", "two"):
        out = tmp_path / name
        assert main(["scaling", "--n", "5..6", "--samples", "4", "--d", "0.2", "--out", str(out)]) == 0
        runs.append(out)
    for name in ("scaling.csv", "scaling_fit.json", "scaling.dat"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
    fit = json.loads((runs[0] / "scaling_fit.json").read_text())
    assert fit["samples"]["5"] + fit["exclusions"]["5"] == 4


def test_hist_and_sweep_outputs(tmp_path):
    assert main(["hist", "--n", "6", "--samples", "20", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "hist_n06.csv").read_text().startswith("bin_lo,bin_hi,count\n")
    assert main(["sweep", "--n", "4..5", "--samples", "2", "--frame", "rotating", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "dynamics.csv").read_text().splitlines()
    assert len(lines) == 5
    assert (tmp_path / "dynamics.dat").exists()
