import json
import subprocess
import sys

import pytest

from lrfput.cli import main
from lrfput.config import ConfigError, RunConfig

FAST = ["grid.q=8", "grid.R=20"]


def run_cli(tmp_path, *args):
    return main([*args, f"output.directory={tmp_path}"])


def test_check_exit_codes(tmp_path, capsys):
    assert run_cli(tmp_path, "check") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["gamma_window"]
    assert run_cli(tmp_path, "check", "potential.alpha=1.4") == 3
    assert "gamma_moment_series" in json.loads(capsys.readouterr().out)["failures"][0]["condition"]
    assert run_cli(tmp_path, "check", "solver.K=0.6") == 3
    assert run_cli(tmp_path, "check", "potential.kind=finite_range_power_law", "potential.m0=4") == 0


def test_config_errors(tmp_path, capsys):
    assert run_cli(tmp_path, "check", "solver.bogus=1") == 2
    assert run_cli(tmp_path, "check", "solver.K=0.2", "solver.delta=0.1") == 2
    assert run_cli(tmp_path, "check", "potential.kind=morse") == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"grid": {"q": 8,}}')
    assert main(["check", "-c", str(bad)]) == 2
    assert "bad.json:1:" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        RunConfig.load(None, ["grid.q"])
    with pytest.raises(ConfigError):
        RunConfig.load(None, ["grid=3"])


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"solver": {"delta": 0.2}, "grid": {"q": 8}}))
    cfg = RunConfig.load(str(path), ["grid.R=30"])
    fam = cfg.family()
    assert cfg.kinetic_energy(fam) == pytest.approx(0.4)
    assert cfg.grid().q == 8 and cfg.grid().R == 30.0
    assert cfg.solver_config(fam).K == pytest.approx(0.4)


def test_solve_writes_outputs_and_is_reproducible(tmp_path, capsys):
    assert run_cli(tmp_path, "solve", *FAST) == 0
    for name in ("solution.json", "profile.csv", "per_m.csv", "manifest.json"):
        assert (tmp_path / name).exists()
    sol = json.loads((tmp_path / "solution.json").read_text())
    assert sol["c"] > 0 and sol["K"] == 0.2
    first = {n: (tmp_path / n).read_bytes() for n in ("solution.json", "profile.csv", "per_m.csv")}
    # rerun from the manifest alone
    manifest = tmp_path / "manifest.json"
    again = tmp_path / "again"
    assert main(["solve", "-c", str(manifest), f"output.directory={again}"]) == 0
    for n, data in first.items():
        assert (again / n).read_bytes() == data


def test_solver_failure_exit_code(tmp_path):
    assert run_cli(tmp_path, "solve", *FAST, "solver.max_iter=2") == 4
    assert run_cli(tmp_path, "solve", *FAST, "solver.K=0.6") == 3


def test_simulate_from_saved_solution(tmp_path):
    assert run_cli(tmp_path, "solve", *FAST, "solver.K=0.3") == 0
    sol = str(tmp_path / "solution.json")
    code = run_cli(tmp_path, "simulate", f"simulate.solution={sol}", "simulate.N=128",
                   "simulate.M_sim=16", "simulate.dt=0.01", "simulate.T_end=3",
                   "simulate.snapshot_stride=100")
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    c = json.loads((tmp_path / "solution.json").read_text())["c"]
    assert abs(rep["c_fit"] / c - 1) < 0.02
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,j,x,v,strain")


def test_simulation_failure_exit_code(tmp_path):
    assert run_cli(tmp_path, "solve", *FAST, "solver.K=0.3") == 0
    sol = str(tmp_path / "solution.json")
    assert run_cli(tmp_path, "simulate", f"simulate.solution={sol}", "simulate.dt=0.5") == 5
    assert run_cli(tmp_path, "simulate", f"simulate.solution={sol}", "simulate.N=40") == 5


def test_sweep_failures_enumerated(tmp_path):
    code = run_cli(tmp_path, "sweep", *FAST, "sweep.K_list=[0.1,0.6,0.2]")
    assert code == 4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert [f["K"] for f in manifest["failures"]] == [0.6]
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("K,delta,c,P,Q_of_K") and len(lines) == 4


def test_sweep_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["sweep", *FAST, "sweep.K_list=[0.1,0.2]", f"output.directory={d}"]) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_highenergy_and_qstudy(tmp_path, capsys):
    assert run_cli(tmp_path, "highenergy", "grid.q=17", "grid.R=20", "sweep.delta_list=[0.2,0.1]") == 0
    out = capsys.readouterr().out
    assert "smallest delta reached: 0.1" in out
    assert (tmp_path / "highenergy.csv").exists()
    assert run_cli(tmp_path, "qstudy", "sweep.L_list=[4,16]") == 0
    assert (tmp_path / "qstudy.csv").read_text().startswith("L,Qcal_WL")


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "lrfput", "check", "potential.alpha=1.4",
                          f"output.directory={tmp_path}"], capture_output=True, text=True)
    assert out.returncode == 3
