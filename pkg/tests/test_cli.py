import json

import pytest

from covmatch.cli import build_parser, run


def _run(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCli:
    def test_certify_trapezoid(self, capsys):
        code, out, _ = _run(capsys, "certify", "builtin:trapezoid", "--order", "4")
        rep = json.loads(out)
        assert code == 0 and rep["certified_order"] == 2
        assert rep["config"]["order"] == 4

    def test_certify_check(self, capsys):
        assert _run(capsys, "certify", "builtin:midpoint", "--order", "2", "--check")[0] == 3
        assert _run(capsys, "certify", "builtin:midpoint", "--order", "2", "--check", "--expect", "1")[0] == 0

    def test_oracle_check(self, capsys):
        code, out, _ = _run(capsys, "oracle", "builtin:trapezoid", "--mu", "3", "--check")
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("# config: ")
        assert lines[1] == "zeta,mu,d,n,direct_value,polynomial_value,diff"
        assert len(lines) == 2 + 2 + 5 + 11

    def test_missing_file(self, capsys):
        code, _, err = _run(capsys, "certify", "missing.json", "--order", "2")
        assert code == 1
        assert err.strip() == "error: kind=input reason=file not found: missing.json"

    def test_unknown_flag(self, capsys):
        code, _, err = _run(capsys, "enumerate", "--mu", "1", "--nope")
        assert code == 1 and len(err.strip().splitlines()) == 1

    def test_capacity(self, capsys):
        code, _, err = _run(capsys, "certify", "builtin:trapezoid", "--order", "7")
        assert code == 2 and "capacity" in err

    def test_enumerate_json(self, capsys):
        code, out, _ = _run(capsys, "enumerate", "--mu", "2", "--format", "json")
        data = json.loads(out)
        assert code == 0 and len(data["indices"]) == 7
        assert data["indices"][0] == {"zeta": "(2,0)", "mu": 1, "d": 0, "n": 1}

    def test_sample_seed_env(self, capsys, monkeypatch):
        monkeypatch.setenv("FK_SEED", "5")
        a = _run(capsys, "sample", "--k", "2", "--samples", "3")[1]
        b = _run(capsys, "sample", "--k", "2", "--samples", "3", "--seed", "5")[1]
        c = _run(capsys, "sample", "--k", "2", "--samples", "3", "--seed", "6")[1]
        assert a == b and a != c
        assert '"seed": 5' in a

    def test_design_outputs(self, capsys, tmp_path):
        scheme, log = tmp_path / "s.json", tmp_path / "log.csv"
        code, out, _ = _run(capsys, "design", "--nq", "1", "--nnu", "1", "--order", "2", "--starts", "4",
                            "--out", str(scheme), "--log", str(log), "--check")
        assert code == 0 and json.loads(out)["certified"]
        assert json.loads(scheme.read_text())["knots"] == ["1/2"]
        assert log.read_text().splitlines()[0] == "start,iterations,residual"

    def test_trotter_summary(self, capsys, tmp_path):
        summary = tmp_path / "sum.json"
        code, out, _ = _run(capsys, "trotter", "--scheme", "builtin:trapezoid", "--n", "3,7,15,31",
                            "--grid=-6:6:192", "--summary", str(summary),
                            "--expect-slope=-2.2:-1.8", "--check")
        assert code == 0
        assert out.splitlines()[1] == "n,value,reference,abs_error"
        assert -2.2 <= json.loads(summary.read_text())["slope"] <= -1.8

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "e.csv"
        code, out, _ = _run(capsys, "enumerate", "--mu", "1", "--out", str(path))
        assert code == 0 and out == ""
        assert path.read_text().splitlines()[2] == '"(2,0)",1,0,1'

    @pytest.mark.parametrize("cmd", ["enumerate", "certify", "oracle", "design", "trotter", "sample"])
    def test_help_documents_flags(self, cmd, capsys):
        parser = build_parser()
        sub = parser._subparsers._group_actions[0].choices[cmd]
        for action in sub._actions:
            assert action.help, (cmd, action.option_strings)
        assert run([cmd, "--help"]) == 0
