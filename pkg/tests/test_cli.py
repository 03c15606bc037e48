import json
import subprocess
import sys

import numpy as np
import pytest

from ncphase import cli, dynamics
from ncphase.errors import StepRejected

BASE = {
    "schema_version": 1,
    "N": 2,
    "field": {"B": 1.0, "C": 1.0},
    "model": {"m": 1.0, "kappa": 1.0},
}


def write_config(tmp_path, obj, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def run(argv):
    return cli.main(argv)


class TestConfigValidation:
    def test_unknown_top_level_key(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, surprise=1))
        assert run(["brackets", "--config", path]) == cli.EXIT_CONFIG

    def test_wrong_schema_version(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, schema_version=2))
        assert run(["brackets", "--config", path]) == cli.EXIT_CONFIG

    def test_field_and_problem_exclusive(self, tmp_path):
        bad = dict(BASE)
        bad["problem"] = {"omega": [[0.0]], "hessian": [[0.0]], "gradient": [0.0]}
        path = write_config(tmp_path, bad)
        assert run(["reduce", "--config", path]) == cli.EXIT_CONFIG

    def test_mixed_field_forms(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 1.0, "Cvec": [0, 0, 1]}))
        assert run(["brackets", "--config", path]) == cli.EXIT_CONFIG

    def test_model_requires_one_potential(self, tmp_path):
        cfg = dict(BASE, model={"m": 1.0, "kappa": 1.0, "Evec": [1.0, 0.0]})
        path = write_config(tmp_path, cfg)
        assert run(["brackets", "--config", path]) == cli.EXIT_CONFIG

    def test_missing_file(self):
        assert run(["brackets", "--config", "/nonexistent/cfg.json"]) == cli.EXIT_CONFIG

    def test_state_length_checked(self, tmp_path):
        cfg = dict(BASE, state=[1.0, 2.0], time={"t_final": 1.0, "dt": 0.1})
        path = write_config(tmp_path, cfg)
        assert run(["simulate", "--config", path]) == cli.EXIT_CONFIG

    def test_no_partial_output_on_error(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, schema_version=99))
        out = tmp_path / "never.json"
        assert run(["brackets", "--config", path, "--out", str(out)]) == cli.EXIT_CONFIG
        assert not out.exists()

    def test_env_tolerance_override(self, tmp_path, monkeypatch):
        # chi = 1e-4 regular structure: det Psi = 1e-8 trips a raised gate.
        cfg = dict(BASE, field={"B": 1.0, "C": 1e-4 - 1.0})
        path = write_config(tmp_path, cfg)
        out = tmp_path / "br.json"
        assert run(["brackets", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        monkeypatch.setenv(cli.ENV_TOL, "1e-6")
        assert run(["brackets", "--config", path, "--out", str(out)]) == cli.EXIT_SINGULAR


class TestBrackets:
    def test_planar_report(self, tmp_path):
        path = write_config(tmp_path, BASE)
        out = tmp_path / "br.json"
        assert run(["brackets", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["status"] == "ok"
        assert rep["brackets"]["qq"][0][1] == pytest.approx(-0.5)
        assert rep["brackets"]["pp"][0][1] == pytest.approx(0.5)
        assert rep["brackets"]["qp"][0][0] == pytest.approx(0.5)

    def test_singular_reports_kernel_dimension(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 1.0, "C": -1.0}))
        out = tmp_path / "sing.json"
        assert run(["brackets", "--config", path, "--out", str(out)]) == cli.EXIT_SINGULAR
        rep = json.loads(out.read_text())
        assert rep["status"] == "singular"
        assert rep["kernel_dimension"] == 2


class TestDarboux:
    def test_closed_route(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 3.0, "C": 1.0}))
        out = tmp_path / "dx.json"
        assert run(["darboux", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["route"] == "closed-n2"
        assert rep["residual"] <= 1e-12
        assert rep["sp_equivalence_residual"] <= 1e-8

    def test_negative_chi_routes_to_generic(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 3.0, "C": -1.0}))
        out = tmp_path / "dx.json"
        assert run(["darboux", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["route"] == "generic"
        assert "note" in rep
        assert rep["residual"] <= 1e-8

    def test_identity_for_zero_fields(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 0.0, "C": 0.0}))
        out = tmp_path / "dx.json"
        run(["darboux", "--config", path, "--out", str(out)])
        rep = json.loads(out.read_text())
        assert np.allclose(rep["T"], np.eye(4))


class TestSimulate:
    def test_free_particle_monotone(self, tmp_path):
        cfg = dict(BASE, field={"B": 0.0, "C": 0.0}, model={"m": 1.0, "kappa": 0.0},
                   state=[0.0, 0.0, 1.0, 0.0], time={"t_final": 1.0, "dt": 0.1})
        path = write_config(tmp_path, cfg)
        out = tmp_path / "free.csv"
        assert run(["simulate", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "t,q1,q2,p1,p2,H,Lambda3"
        q1 = [float(line.split(",")[1]) for line in lines[1:]]
        assert all(b > a for a, b in zip(q1, q1[1:]))

    def test_energy_column_constant(self, tmp_path):
        cfg = dict(BASE, state=[1.0, 0.0, 0.0, 1.0],
                   time={"t_final": 5.0, "dt": 0.05, "method": "exact"})
        path = write_config(tmp_path, cfg)
        out = tmp_path / "osc.csv"
        assert run(["simulate", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        lines = out.read_text().splitlines()
        h_col = lines[0].split(",").index("H")
        energies = [float(line.split(",")[h_col]) for line in lines[1:]]
        assert max(energies) - min(energies) <= 1e-10 * abs(energies[0])

    def test_degenerate_flow_stays_on_constraints(self, tmp_path):
        cfg = dict(BASE, field={"B": 1.0, "C": -1.0}, state=[1.0, 0.0, 0.0, 1.0],
                   time={"t_final": 20.0, "dt": 0.1})
        path = write_config(tmp_path, cfg)
        out = tmp_path / "deg.csv"
        assert run(["simulate", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0].endswith("constraint_residual")
        residuals = [float(line.split(",")[-1]) for line in lines[1:]]
        assert max(residuals) <= 1e-9

    def test_axial_trajectory_columns(self, tmp_path):
        cfg = dict(BASE, N=3, field={"Bvec": [0, 0, 1.0], "Cvec": [0, 0, 0.5]},
                   state=[1.0, 0.0, 0.3, 0.0, 0.7, -0.2],
                   time={"t_final": 2.0, "dt": 0.1})
        path = write_config(tmp_path, cfg)
        out = tmp_path / "axial.csv"
        assert run(["simulate", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "t,q1,q2,q3,p1,p2,p3,H,Lambda3"
        lam3 = [float(line.split(",")[-1]) for line in lines[1:]]
        assert max(lam3) - min(lam3) <= 1e-9

    def test_step_rejection_exit_code(self, tmp_path, monkeypatch):
        # No in-scope config degenerates the midpoint resolvent (the flow
        # spectra are purely imaginary), so the exit path is driven directly.
        def reject(*args, **kwargs):
            raise StepRejected("forced", suggested_dt=0.01)

        monkeypatch.setattr(dynamics, "integrate", reject)
        cfg = dict(BASE, state=[1.0, 0.0, 0.0, 1.0],
                   time={"t_final": 1.0, "dt": 0.5, "method": "midpoint"})
        path = write_config(tmp_path, cfg)
        out = tmp_path / "rej.csv"
        code = run(["simulate", "--config", path, "--out", str(out)])
        assert code == cli.EXIT_STEP_REJECTED
        assert not out.exists()

    def test_off_constraint_initial_state(self, tmp_path):
        cfg = dict(BASE, field={"B": 1.0, "C": -1.0}, state=[1.0, 0.0, 0.0, 0.0],
                   time={"t_final": 1.0, "dt": 0.1})
        path = write_config(tmp_path, cfg)
        assert run(["simulate", "--config", path]) == cli.EXIT_CONFIG


class TestSpectrum:
    def test_isotropic_ground_state(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 0.0, "C": 0.0}))
        out = tmp_path / "sp.json"
        assert run(["spectrum", "--config", path, "--out", str(out), "--nmax", "1"]) == cli.EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["levels"][0]["energy"] == pytest.approx(1.0)

    def test_worked_ground_state(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 1.0, "C": 0.0}))
        out = tmp_path / "sp.json"
        run(["spectrum", "--config", path, "--out", str(out), "--nmax", "2"])
        rep = json.loads(out.read_text())
        assert rep["kind"] == "planar"
        assert rep["levels"][0]["energy"] == pytest.approx(np.sqrt(5) / 2, abs=1e-12)

    def test_degenerate_ladder(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 1.0, "C": -1.0}))
        out = tmp_path / "sp.json"
        run(["spectrum", "--config", path, "--out", str(out), "--nmax", "2"])
        rep = json.loads(out.read_text())
        assert rep["kind"] == "degenerate-ladder"
        assert [lvl["energy"] for lvl in rep["levels"]] == pytest.approx([0.25, 0.75, 1.25])

    def test_axial_spectrum(self, tmp_path):
        cfg = dict(BASE, N=3, field={"Bvec": [0, 0, 1.0], "Cvec": [0, 0, 0.0]})
        path = write_config(tmp_path, cfg)
        out = tmp_path / "sp.json"
        assert run(["spectrum", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["kind"] == "axial"
        assert rep["levels"][0]["energy"] == pytest.approx(np.sqrt(5) / 2 + 0.5, abs=1e-12)

    def test_crossed_axial_fields_rejected(self, tmp_path):
        cfg = dict(BASE, N=3, field={"Bvec": [0, 0, 1.0], "Cvec": [1.0, 0, 0]})
        path = write_config(tmp_path, cfg)
        assert run(["spectrum", "--config", path]) == cli.EXIT_CONFIG


class TestLimitScan:
    def test_scan_columns_and_trivial_row(self, tmp_path):
        path = write_config(tmp_path, BASE)
        out = tmp_path / "scan.csv"
        code = run(["limit-scan", "--config", path, "--out", str(out),
                    "--eps-min", "1", "--eps-max", "1", "--points", "1"])
        assert code == cli.EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "epsilon,omega_plus,omega_minus,omega_r_target,fast_amplitude"
        row = [float(v) for v in lines[1].split(",")]
        fr = dynamics.n2_frequencies(dynamics.OscillatorModel(m=1, kappa=1), 1.0, 0.0)
        assert row[1] == pytest.approx(fr.omega_plus)
        assert row[2] == pytest.approx(fr.omega_minus)

    def test_scan_orders(self, tmp_path):
        path = write_config(tmp_path, BASE)
        out = tmp_path / "scan.csv"
        run(["limit-scan", "--config", path, "--out", str(out),
             "--eps-min", "1e-3", "--eps-max", "1e-1", "--points", "9"])
        rows = [list(map(float, line.split(","))) for line in out.read_text().splitlines()[1:]]
        eps = np.array([r[0] for r in rows])
        defect = np.array([abs(r[2] - r[3]) for r in rows])
        slope = np.polyfit(np.log(eps), np.log(defect), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)


class TestReduce:
    def test_nondegenerate_single_link(self, tmp_path):
        path = write_config(tmp_path, BASE)
        out = tmp_path / "red.json"
        assert run(["reduce", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["status"] == "consistent"
        assert rep["dimensions"] == [4]

    def test_degenerate_chain(self, tmp_path):
        path = write_config(tmp_path, dict(BASE, field={"B": 1.0, "C": -1.0}))
        out = tmp_path / "red.json"
        assert run(["reduce", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["dimensions"] == [4, 2]
        assert sorted(rep["eigenvalues"]["imag"]) == pytest.approx([-0.5, 0.5], abs=1e-10)
        assert rep["eigenvalues"]["real"] == pytest.approx([0.0, 0.0], abs=1e-10)

    def test_inconsistent_problem_block(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "N": 2,
            "problem": {
                "omega": [[0, -1, 1, 0], [1, 0, 0, 1], [-1, 0, 0, -1], [0, -1, 1, 0]],
                "hessian": [[0] * 4] * 4,
                "gradient": [1.0, 0.0, 0.0, 0.0],
            },
        }
        path = write_config(tmp_path, cfg)
        out = tmp_path / "inc.json"
        assert run(["reduce", "--config", path, "--out", str(out)]) == cli.EXIT_INCONSISTENT
        rep = json.loads(out.read_text())
        assert rep["status"] == "inconsistent"


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        jobs = [
            (["brackets"], BASE),
            (["darboux"], dict(BASE, field={"B": 3.0, "C": 1.0})),
            (["simulate"], dict(BASE, state=[1.0, 0.0, 0.0, 1.0],
                                time={"t_final": 2.0, "dt": 0.05, "method": "midpoint"})),
            (["spectrum", "--nmax", "3"], dict(BASE, field={"B": 1.0, "C": 0.0})),
            (["limit-scan", "--points", "5"], BASE),
            (["reduce"], dict(BASE, field={"B": 1.0, "C": -1.0})),
        ]
        for argv, cfg in jobs:
            path = write_config(tmp_path, cfg, name=f"{argv[0]}.json")
            out_a = tmp_path / f"{argv[0]}-a.out"
            out_b = tmp_path / f"{argv[0]}-b.out"
            assert run([argv[0], "--config", path, "--out", str(out_a)] + argv[1:]) == cli.EXIT_OK
            assert run([argv[0], "--config", path, "--out", str(out_b)] + argv[1:]) == cli.EXIT_OK
            assert out_a.read_bytes() == out_b.read_bytes(), argv[0]


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        path = write_config(tmp_path, BASE)
        proc = subprocess.run(
            [sys.executable, "-m", "ncphase.cli", "brackets", "--config", path],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["status"] == "ok"
