import json
import subprocess
import sys

import pytest

from segreweb.cli import InputError, load_problem, problem_from_dict, run
from segreweb.heavenly import HeavenlySpec, ThetaSpec
from segreweb.ode import OdeSpec
from segreweb.web import WebSpec


@pytest.fixture
def spec_file(tmp_path):
    def write(doc, name="spec.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
        return str(p)

    return write


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, json.loads(out.out), out.err


class TestLoadProblem:
    def test_kinds(self, spec_file):
        assert isinstance(load_problem(spec_file({"kind": "heavenly", "m": 2, "R": ["0", "-x1^2/2"]})), HeavenlySpec)
        ts = load_problem(spec_file({"kind": "theta", "m": 2, "theta": {"12": "x1^3/6"}}))
        assert isinstance(ts, ThetaSpec) and not ts.f
        assert isinstance(load_problem(spec_file({"kind": "web", "m": 2, "w": ["x1+y1", "x2+y2"]})), WebSpec)
        assert isinstance(load_problem(spec_file({"kind": "ode", "m": 2, "F": ["-x1", "-x2"]})), OdeSpec)

    def test_arity(self):
        with pytest.raises(InputError, match="w"):
            problem_from_dict({"kind": "web", "m": 2, "w": ["x1+y1"]})

    def test_missing_kind(self):
        with pytest.raises(InputError, match="kind"):
            problem_from_dict({"m": 2, "w": ["x1", "x2"]})

    def test_parse_offset(self):
        with pytest.raises(InputError, match=r"R\[1\].*offset"):
            problem_from_dict({"kind": "heavenly", "m": 2, "R": ["0", "x1 + + "]})

    def test_bad_json(self, spec_file):
        with pytest.raises(InputError):
            load_problem(spec_file("{not json"))


class TestCommands:
    def test_verify_web_flat(self, capsys, spec_file):
        code, rep, _ = call(capsys, "verify-web", "--spec", spec_file({"kind": "web", "m": 2, "w": ["x1+y1", "x2+y2"]}))
        assert code == 0
        v = rep["verdicts"]
        assert v["torsion_free"] and v["ricci_flat"] and v["hyper_kahler"]
        assert rep["tol"] == 1e-9

    def test_verify_web_torsion(self, capsys, spec_file):
        code, rep, _ = call(capsys, "verify-web", "--spec", spec_file({"kind": "web", "m": 2, "w": ["x1+y1+x1^2*y2", "x2+y2"]}))
        assert code == 1 and rep["verdicts"]["torsion_free"] is False
        assert rep["norms"]["torsion"] > 1e-9

    def test_heavenly_residual(self, capsys, spec_file):
        path = spec_file({"kind": "theta", "m": 2, "theta": {"12": "x1^2*x2^2"}})
        code, rep, _ = call(capsys, "heavenly-residual", "--spec", path, "--points", "10")
        assert code == 1
        assert rep["norms"]["residual"] == pytest.approx(12)
        assert rep["unit_point_values"]["12,12"] == -12

    def test_heavenly_residual_solution(self, capsys, spec_file):
        code, rep, _ = call(capsys, "heavenly-residual", "--spec", spec_file({"kind": "theta", "m": 2, "theta": {"12": "x1^3/6"}}))
        assert code == 0 and rep["verdicts"]["residual_zero"]

    def test_ode_invariants(self, capsys, spec_file):
        code, rep, _ = call(capsys, "ode-invariants", "--spec", spec_file({"kind": "ode", "m": 2, "F": ["-x1", "-x2"]}))
        assert code == 0
        assert rep["T"] == "identity" and rep["trB"] == 0 and rep["wilczynski"] == 0

    def test_eq1_and_lax(self, capsys, spec_file):
        good = spec_file({"kind": "heavenly", "m": 2, "R": ["0", "-x1^2/2"]}, "good.json")
        bad = spec_file({"kind": "heavenly", "m": 2, "R": ["x1^2*y2", "0"]}, "bad.json")
        assert call(capsys, "eq1-check", "--spec", good)[0] == 0
        assert call(capsys, "eq1-check", "--spec", bad)[0] == 1
        code, rep, _ = call(capsys, "lax-check", "--spec", bad, "--t-samples", "1,2")
        assert code == 1 and rep["verdicts"]["agrees_with_eq1"] and rep["t_samples"] == ["1", "2"]

    def test_biham(self, capsys, spec_file):
        code, rep, _ = call(capsys, "biham-check", "--spec", spec_file({"kind": "heavenly", "m": 2, "R": ["0", "-x1^2/2"]}))
        assert code == 0 and rep["ranks"] == [4] * 10 and rep["witness"] is None
        code, rep, _ = call(capsys, "biham-check", "--spec", spec_file({"kind": "heavenly", "m": 2, "R": ["x1^2*y2", "0"]}))
        assert code == 1 and rep["witness"]["value"] != 0

    def test_gauge(self, capsys, spec_file):
        path = spec_file({"kind": "ode", "m": 2, "F": ["-2*y1/t", "-2*y2/t"]})
        assert call(capsys, "gauge-residual", "--spec", path, "--ttilde", "1/t")[0] == 0
        assert call(capsys, "gauge-residual", "--spec", spec_file({"kind": "ode", "m": 2, "F": ["-x1", "-x2"]}, "o.json"), "--ttilde", "t")[0] == 1
        # no gauge given on the command line or in the file
        assert call(capsys, "gauge-residual", "--spec", path)[0] == 2

    def test_solve_and_certify(self, capsys, spec_file, tmp_path):
        path = spec_file({"kind": "theta", "m": 2, "theta": {"12": "x1^3/6"}})
        code, rep, _ = call(capsys, "solve", "--spec", path, "--degree", "5")
        assert code == 0 and rep["D"] == 5 and rep["certificate"]["pass"]
        sol = tmp_path / "sol.json"
        sol.write_text(json.dumps(rep))
        code, cert, _ = call(capsys, "certify", "--spec", str(sol))
        assert code == 0 and all(cert["verdicts"].values())

    def test_certify_non_solution(self, capsys, spec_file):
        code, rep, _ = call(capsys, "certify", "--spec", spec_file({"kind": "theta", "m": 2, "theta": {"12": "x1^2*x2^2"}}))
        assert code == 1 and rep["verdicts"]["a"] is False
        assert rep["certificate"]["a"]["witness"] == {"(2,2,0,0)": "-12"}


class TestErrors:
    def test_arity_exit(self, capsys, spec_file):
        code = run(["verify-web", "--spec", spec_file({"kind": "web", "m": 2, "w": ["x1+y1"]})])
        out = capsys.readouterr()
        assert code == 2 and "arity" in out.err and "error" in json.loads(out.out)

    def test_missing_file(self, capsys, tmp_path):
        assert run(["verify-web", "--spec", str(tmp_path / "none.json")]) == 2

    def test_unknown_subcommand(self, capsys):
        assert run(["frobnicate", "--spec", "x"]) == 2

    def test_wrong_kind_for_command(self, capsys, spec_file):
        assert run(["ode-invariants", "--spec", spec_file({"kind": "web", "m": 2, "w": ["x1", "x2"]})]) == 2


class TestDeterminism:
    @pytest.mark.parametrize(
        "cmd,doc",
        [
            ("verify-web", {"kind": "web", "m": 2, "w": ["x1+y1+x1^2*y2", "x2+y2"]}),
            ("biham-check", {"kind": "heavenly", "m": 2, "R": ["x1^2*y2", "0"]}),
            ("heavenly-residual", {"kind": "theta", "m": 3, "theta": {"12": "x1*x3^2", "23": "y1*x2"}}),
        ],
    )
    def test_byte_identical(self, capsys, spec_file, cmd, doc):
        path = spec_file(doc)
        run([cmd, "--spec", path, "--seed", "7"])
        first = capsys.readouterr().out
        run([cmd, "--spec", path, "--seed", "7"])
        assert capsys.readouterr().out == first
        run([cmd, "--spec", path, "--seed", "8"])
        assert json.loads(capsys.readouterr().out)["seed"] == 8

    def test_tol_echoed(self, capsys, spec_file):
        _, rep, _ = call(capsys, "eq1-check", "--spec", spec_file({"kind": "heavenly", "m": 2, "R": ["0", "0"]}), "--tol", "1e-6")
        assert rep["tol"] == 1e-6

    def test_console_entry(self, spec_file):
        path = spec_file({"kind": "ode", "m": 2, "F": ["0", "0"]})
        proc = subprocess.run([sys.executable, "-m", "segreweb.cli", "ode-invariants", "--spec", path], capture_output=True, text=True)
        assert proc.returncode == 0 and json.loads(proc.stdout)["verdicts"]["wilczynski_zero"]
