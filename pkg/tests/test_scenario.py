import dataclasses
import subprocess
import sys

import numpy as np
import pytest

from madelung_gauge.cli import main
from madelung_gauge.errors import InvalidValue, MissingKey, ScenarioError, UnknownKey
from madelung_gauge.runner import (
    convergence_study,
    observed_orders,
    refine,
    run_scenario,
)
from madelung_gauge.scenario import (
    bundled_scenarios,
    parse_scenario,
    resolve_scenario,
    serialize_scenario,
)

MINIMAL = """
name = tiny
grid.n = 64
grid.min = -1
grid.max = 1
initial.kind = exponential
diagnostics = spin_gauge
"""

EVOLVING = """
# free packet, short run
name = packet
grid.n = 257
grid.min = -10
grid.max = 10
initial.kind = free_gaussian
initial.sigma0 = 1.0
initial.k0 = 0.5
evolution.dt = 1e-3
evolution.steps = 1000
evolution.stride = 100
diagnostics = continuity, hje
tolerance.continuity = 1e-3
tolerance.hje = 5e-2
"""


def test_minimal_config_gets_defaults():
    s = parse_scenario(MINIMAL)
    assert s.constants.hbar == 1.0 and s.constants.mass == 1.0
    assert s.constants.light_speed == 137.035999
    assert s.node_epsilon == 1e-10
    assert s.spin.alpha == 0.5
    assert s.evolution.steps == 0
    assert s.diagnostics == ("spin_gauge",)


def test_missing_key():
    text = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith("grid.n"))
    with pytest.raises(MissingKey) as err:
        parse_scenario(text)
    assert err.value.key == "grid.n"


def test_unknown_key():
    with pytest.raises(UnknownKey) as err:
        parse_scenario(MINIMAL + "grid.nn = 3\n")
    assert err.value.key == "grid.nn"
    with pytest.raises(UnknownKey):
        parse_scenario(MINIMAL + "initial.sigma0 = 1\n")


@pytest.mark.parametrize("extra, key", [
    ("evolution.steps = 10\n", "evolution.dt"),
    ("grid.boundary = open\n", "grid.boundary"),
    ("spin.alpha = -1\n", "spin.alpha"),
    ("stationary = maybe\n", "stationary"),
    ("name = again\n", "name"),
])
def test_invalid_values(extra, key):
    with pytest.raises(InvalidValue) as err:
        parse_scenario(MINIMAL + extra)
    assert err.value.key == key


def test_diagnostic_prerequisites():
    with pytest.raises(InvalidValue):
        parse_scenario(MINIMAL.replace("spin_gauge", "continuity"))
    with pytest.raises(InvalidValue):
        parse_scenario(EVOLVING.replace("continuity, hje", "energy"))
    with pytest.raises(InvalidValue):
        parse_scenario(MINIMAL.replace("spin_gauge", ""))
    with pytest.raises(MissingKey):
        parse_scenario(EVOLVING.replace("continuity, hje", "trajectories"))


def test_round_trip():
    for text in [MINIMAL, EVOLVING, *bundled_scenarios().values()]:
        s = parse_scenario(text)
        assert parse_scenario(serialize_scenario(s)) == s


def test_bundled_scenarios_present():
    names = set(bundled_scenarios())
    assert names == {"plane_wave", "free_gaussian", "ho_ground", "spin_half", "power_law_gauge"}
    assert resolve_scenario("spin_half").grid.n == (256, 256)
    with pytest.raises(FileNotFoundError):
        resolve_scenario("nope")


def test_run_writes_fields_and_report(tmp_path):
    s = parse_scenario(EVOLVING)
    rep = run_scenario(s, tmp_path)
    assert rep.passed
    assert set(rep.results) == {"continuity", "hje"}
    text = (tmp_path / "report.txt").read_text()
    assert "result.continuity = pass" in text and text.endswith("status = pass\n")
    assert (tmp_path / "psi_final.csv").read_text().splitlines()[0] == "x,re,im"
    assert (tmp_path / "hje_residual.csv").read_text().splitlines()[0] == "x,value"
    data = np.loadtxt(tmp_path / "psi_initial.csv", delimiter=",", skiprows=1)
    assert data.shape == (257, 3)


def test_run_2d_csv_header(tmp_path):
    s = parse_scenario(MINIMAL.replace("grid.n = 64", "grid.n = 32, 32")
                       .replace("exponential", "power_law_radial"))
    rep = run_scenario(s, tmp_path)
    assert rep.results["spin_gauge"].values["deviation"] < 1e-10
    assert (tmp_path / "spin_z.csv").read_text().splitlines()[0] == "x,y,value"


def test_run_is_deterministic():
    s = parse_scenario(EVOLVING)
    assert run_scenario(s).to_text() == run_scenario(s).to_text()


def test_coarse_grid_fails_named_diagnostic():
    s = parse_scenario(EVOLVING.replace("grid.n = 257", "grid.n = 48")
                       .replace("tolerance.hje = 5e-2", "tolerance.hje = 1.0"))
    rep = run_scenario(s)
    assert not rep.passed
    assert rep.failing == ["continuity"]
    assert "result.continuity = fail" in rep.to_text()


def test_module_errors_carry_scenario_name():
    s = parse_scenario(MINIMAL.replace("exponential", "free_gaussian"))
    with pytest.raises(ScenarioError, match="tiny"):
        run_scenario(s)


def test_convergence_orders_for_continuity():
    s = parse_scenario(EVOLVING.replace("grid.n = 257", "grid.n = 513")
                       .replace("dt = 1e-3", "dt = 4e-3").replace("steps = 1000", "steps = 250")
                       .replace("stride = 100", "stride = 10"))
    table = convergence_study(s, 3)
    assert all(abs(o - 2.0) < 0.3 for o in table.orders["continuity_l2"])
    assert table.dt == [4e-3, 2e-3, 1e-3]
    assert "order.continuity_l2" in "\n".join(table.lines())


def test_floor_orders():
    assert observed_orders([1e-12, 1e-13, 4e-3, 1e-3]) == ["floor", pytest.approx(-35.2, abs=0.1), 2.0]


def test_refine_keeps_total_time():
    s = parse_scenario(EVOLVING)
    r = refine(s)
    assert r.grid.n == (513,)
    assert r.evolution.dt * r.evolution.steps == pytest.approx(s.evolution.dt * s.evolution.steps)
    assert r.evolution.stride == s.evolution.stride


def test_seed_override_changes_only_ensemble():
    s = parse_scenario(EVOLVING.replace("continuity, hje", "trajectories")
                       + "trajectories.starts = 0.5, 1.0\ntrajectories.ensemble = 500\n")
    a = run_scenario(s, seed=1).results["trajectories"].values
    b = run_scenario(s, seed=2).results["trajectories"].values
    assert a["max_error"] == b["max_error"]
    assert a["chi2"] != b["chi2"]


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text(EVOLVING)
    assert main(["run", str(good), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "report.txt").exists()
    bad = tmp_path / "bad.cfg"
    bad.write_text(EVOLVING + "grid.typo = 1\n")
    assert main(["run", str(bad)]) == 2
    failing = tmp_path / "fail.cfg"
    failing.write_text(EVOLVING.replace("grid.n = 257", "grid.n = 48"))
    assert main(["run", str(failing)]) == 1
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["converge", str(good), "--levels", "1"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    capsys.readouterr()
    assert main(["list-scenarios"]) == 0
    assert "ho_ground" in capsys.readouterr().out.split()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "madelung_gauge", "list-scenarios"],
                         capture_output=True, text=True, check=True)
    assert "spin_half" in out.stdout


def test_custom_table_potential(tmp_path):
    table = tmp_path / "v.csv"
    x = np.linspace(-10, 10, 2001)
    np.savetxt(table, np.column_stack([x, 0.5 * x**2]), delimiter=",", header="x,value", comments="")
    text = (EVOLVING.replace("initial.kind = free_gaussian", "initial.kind = ho_ground")
            .replace("initial.sigma0 = 1.0\ninitial.k0 = 0.5\n", "")
            + f"potential.kind = custom_table\npotential.table = {table}\n")
    s = parse_scenario(text)
    assert run_scenario(dataclasses.replace(s, diagnostics=("continuity",))).passed
