"""Serialization round trips and the command-line front end."""

import json
import subprocess
import sys

import numpy as np
import pytest

import polarcone as pc
from polarcone import io as pio
from polarcone.cli import main
from oracles import feasible_force_1d, manufactured_2d


@pytest.fixture()
def two_particle_file(tmp_path):
    path = tmp_path / "state.json"
    path.write_text(
        json.dumps(
            {
                "atoms": [0.25, 0.75],
                "weights": [0.5, 0.5],
                "X0": [0.0, 1.0],
                "V0": [1.0, -1.0],
            }
        )
    )
    return path


class TestIO:
    def test_sticky_round_trip(self, tmp_path):
        st = pc.StickyState.from_arrays([0.0, 0.5, 1.0], [1.0, 0.0, -1.0], [0.25, 0.5, 0.25])
        path = tmp_path / "s.json"
        pio.save_sticky_state(st, path)
        back = pio.load_sticky_state(path)
        assert np.array_equal(back.X0.values, st.X0.values)
        assert np.array_equal(back.V0, st.V0)
        assert np.array_equal(back.measure.weights, st.measure.weights)

    def test_problem_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        g = pc.Grid([[0.0, 1.0]], (8,))
        F, _, _ = feasible_force_1d(g, rng)
        H = pc.MatrixMeasureField(g, rng.uniform(0, 1, (8, 1, 1)))
        path = tmp_path / "p.json"
        pio.save_problem(g, F, H, path, gamma=1.4)
        g2, F2, H2, gamma = pio.load_problem(path)
        assert g2 == g
        assert np.array_equal(F2.atoms, F.atoms)
        assert np.array_equal(F2.vectors, F.vectors)
        assert np.array_equal(H2.cells, H.cells)
        assert gamma == 1.4

    def test_field_csv_round_trip(self, tmp_path):
        problem, m_star = manufactured_2d(6, seed=1)
        path = tmp_path / "m.csv"
        pio.save_field_csv(m_star, path)
        header = path.read_text().splitlines()[0]
        assert header == "cell_i,cell_j,m11,m12,m22"
        back = pio.load_field_csv(path, problem.grid)
        assert np.array_equal(back.cells, m_star.cells)


class TestCLI:
    def test_simulate_two_particle(self, two_particle_file, tmp_path):
        out = tmp_path / "traj.csv"
        rc = main(
            [
                "simulate",
                "--input",
                str(two_particle_file),
                "--output",
                str(out),
                "--t-max",
                "2",
                "--steps",
                "4",
            ]
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,index,X,V,block_id"
        t1 = [l for l in lines if l.startswith("1.0,")]
        assert t1 == ["1.0,0,0.5,0.0,0", "1.0,1,0.5,0.0,0"]

    def test_simulate_deterministic(self, two_particle_file, tmp_path):
        args = [
            "simulate",
            "--input",
            str(two_particle_file),
            "--t-max",
            "1.5",
            "--steps",
            "7",
        ]
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--output", str(out1)]) == 0
        assert main(args + ["--output", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_project(self, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(json.dumps({"values": [3.0, 1.0, 2.0], "weights": [1, 1, 1]}))
        dst = tmp_path / "out.json"
        assert main(["project", "--input", str(src), "--output", str(dst)]) == 0
        data = json.loads(dst.read_text())
        assert data["values"] == [2.0, 2.0, 2.0]

    def test_certify_feasible_and_exit_codes(self, two_particle_file, tmp_path):
        cert = tmp_path / "cert.json"
        rc = main(
            [
                "certify",
                "--input",
                str(two_particle_file),
                "--time",
                "1.0",
                "--output",
                str(cert),
            ]
        )
        assert rc == 0
        assert json.loads(cert.read_text())["feasible"] is True

    def test_certify_direct_infeasible(self, tmp_path):
        src = tmp_path / "bad.json"
        src.write_text(
            json.dumps({"Y": [-1.0, 1.0], "X": [0.0, 1.0], "weights": [0.5, 0.5]})
        )
        cert = tmp_path / "cert.json"
        rc = main(["certify", "--input", str(src), "--output", str(cert)])
        assert rc == 1
        assert json.loads(cert.read_text())["feasible"] is False

    def test_recover_verify_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        g = pc.Grid([[0.0, 1.0]], (10,))
        F, _, _ = feasible_force_1d(g, rng)
        prob_path = tmp_path / "problem.json"
        pio.save_problem(g, F, None, prob_path)
        result = tmp_path / "result.json"
        rc = main(
            ["recover", "--problem", str(prob_path), "--output", str(result)]
        )
        assert rc == 0
        data = json.loads(result.read_text())
        assert data["converged"] is True
        rc = main(
            ["verify", "--problem", str(prob_path), "--result", str(result)]
        )
        assert rc == 0

    def test_recover_infeasible_exit_2(self, tmp_path):
        g = pc.Grid([[0.0, 1.0]], (8,))
        centers = g.cell_centers().reshape(-1)
        F = pc.VectorMeasure(centers[[2, 5]][:, None], np.array([[-0.7], [0.7]]))
        prob_path = tmp_path / "problem.json"
        pio.save_problem(g, F, None, prob_path)
        rc = main(
            [
                "recover",
                "--problem",
                str(prob_path),
                "--output",
                str(tmp_path / "r.json"),
            ]
        )
        assert rc == 2

    def test_gauge_prints_value(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        g = pc.Grid([[0.0, 1.0]], (8,))
        F, _, _ = feasible_force_1d(g, rng)
        prob_path = tmp_path / "problem.json"
        pio.save_problem(g, F, None, prob_path)
        field = tmp_path / "v.json"
        field.write_text(json.dumps({"cells": [[0.1]] * 8}))
        rc = main(
            ["gauge", "--problem", str(prob_path), "--field", str(field), "--fast"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert out.startswith("gauge=")
        float(out.split("=", 1)[1])

    def test_gen_instance_pipeline(self, tmp_path):
        n = 6
        g = pc.Grid([[0.0, 1.0], [0.0, 1.0]], (n, n))
        nodes = g.nodes()
        flow = {
            "grid": pio.grid_to_dict(g),
            "gamma": 1.4,
            "f_nodes": nodes.tolist(),
            "h_nodes": nodes.tolist(),
            "e_weights": np.full((n, n), 0.2).tolist(),
            "rho": {
                "atoms": g.cell_centers().reshape(-1, 2).tolist(),
                "weights": [1.0 / (n * n)] * (n * n),
            },
        }
        flow_path = tmp_path / "flow.json"
        flow_path.write_text(json.dumps(flow))
        prob_path = tmp_path / "problem.json"
        assert main(["gen-instance", "--flow", str(flow_path), "--output", str(prob_path)]) == 0
        grid, F, H, gamma = pio.load_problem(prob_path)
        assert gamma == 1.4
        assert np.abs(F.vectors).max() == 0.0
        assert H.is_psd(1e-12)

    def test_bad_input_exit_3(self, tmp_path):
        missing = tmp_path / "nope.json"
        assert main(["simulate", "--input", str(missing), "--output", str(tmp_path / "o"), "--t-max", "1"]) == 3
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        assert main(["certify", "--input", str(broken), "--output", str(tmp_path / "c")]) == 3

    def test_module_entry_point(self, two_particle_file, tmp_path):
        out = tmp_path / "t.csv"
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "polarcone",
                "simulate",
                "--input",
                str(two_particle_file),
                "--output",
                str(out),
                "--t-max",
                "1",
                "--steps",
                "2",
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert out.exists()

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for cmd in ("simulate", "project", "certify", "recover", "verify", "gauge", "gen-instance"):
            assert cmd in out
