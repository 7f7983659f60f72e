import json

import numpy as np
import pytest

from bosekinetic.cli import build_parser, main
from bosekinetic.config import explicit_initial_data, parse_config
from bosekinetic.core import ConfigurationError, build_grid

TINY = """
[grid]
n_axial = 9
n_radial = 6
n_modes = 2
[time]
dt = 0.1
T_final = 0.5
[init]
amp_R = 0.02
amp_Phi = 0.02
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(TINY)
    return path


def test_parse_config_values():
    rc = parse_config(TINY + "[physics]\nLambda_cut = 1.1\n[run]\nmode = picard-windows\n")
    assert rc.params.n_axial == 9 and rc.params.Lambda_cut == 1.1
    assert rc.dt == 0.1 and rc.T_final == 0.5 and rc.mode == "picard-windows"
    assert rc.amp_R == 0.02


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    "[physics]\nfoo = 1\n",
    "[grid]\nbar = 2\n",
    "[physics]\ng = abc\n",
    "[run]\nmode = euler\n",
    "[time]\ndt = -1\n",
    "[physics]\ngamma = 2\n",
    "not an ini file",
])
def test_parse_config_errors(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_explicit_initial_data():
    rc = parse_config(TINY + "phi_modes = 1: 0.01+0.002j, -1: 0.01\nr_modes = 0: 0.1 0.05; 1: 0.05j\n")
    g = build_grid(rc.params)
    R, Phi = explicit_initial_data(rc, g)
    assert Phi.coeffs[3] == 0.01 + 0.002j and Phi.coeffs[1] == 0.01
    assert np.allclose(R.modes[2], (0.1 + 0.05 * g.a) / (1 + g.p2))
    assert R.is_hermitian()
    assert explicit_initial_data(parse_config(TINY), g) is None
    bad = parse_config(TINY + "phi_modes = 5: 0.1\n")
    with pytest.raises(ConfigurationError):
        explicit_initial_data(bad, g)


def test_parser_lists_subcommands():
    ap = build_parser()
    for cmd in ("verify-operators", "simulate", "picard-check", "decay-scan", "energy-audit"):
        assert ap.parse_args([cmd]).command == cmd


def test_verify_operators(cfg, tmp_path, capsys):
    assert main(["verify-operators", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "operators.json").read_text())
    assert rep["passed"]


def test_simulate_writes_outputs(cfg, tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "diagnostics.csv").read_text().splitlines()
    assert lines[0].startswith("t,mass,mass_drift") and len(lines) == 7
    summary = json.loads((out / "summary.json").read_text())
    assert summary["flags"]["mass"] and summary["aborted"] is None


def test_simulate_abort_gives_exit_one(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(TINY + "[run]\nmass_tol = 0\n")
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "b")]) == 1
    assert json.loads((tmp_path / "b" / "summary.json").read_text())["aborted"]


def test_picard_check(cfg, tmp_path, capsys):
    assert main(["picard-check", "--config", str(cfg), "--out", str(tmp_path),
                 "--window", "0.5"]) == 0
    rep = json.loads((tmp_path / "picard.json").read_text())
    assert rep["converged"] and rep["max_factor_after_first"] < 0.5


def test_energy_audit(cfg, tmp_path, capsys):
    rc = main(["energy-audit", "--config", str(cfg), "--out", str(tmp_path), "--levels", "2"])
    rep = json.loads((tmp_path / "energy.json").read_text())
    assert len(rep["alpha_residual"]) == 2
    assert rc == (0 if rep["passed"] else 1)


def test_decay_scan(cfg, tmp_path, capsys):
    rc = main(["decay-scan", "--config", str(cfg), "--out", str(tmp_path),
               "--gammas", "0.05,0.1", "--horizon", "2"])
    rows = json.loads((tmp_path / "decay.json").read_text())["rows"]
    assert [r["gamma"] for r in rows] == [0.05, 0.1]
    assert (tmp_path / "decay.csv").read_text().startswith("gamma,zeta_hat")
    assert rc in (0, 1)


def test_configuration_error_exit_code(tmp_path, capsys):
    path = tmp_path / "x.ini"
    path.write_text("[physics]\ngamma = 5\n")
    assert main(["simulate", "--config", str(path)]) == 2
    assert "error" in capsys.readouterr().err
