import json

import pytest

from opdual.fields import QQ
from opdual.operads import builtin_operad
from opdual.cli import CliError, load_operad_spec, main

COM3 = {
    "field": "Q", "max_arity": 3,
    "terms": {"2": {"basis": [{"name": "e2", "degree": 0}], "d": []},
              "3": {"basis": [{"name": "e3", "degree": 0}], "d": []}},
    "sigma": {"2": {"1": [[0, 0, 1]]},
              "3": {"1": [[0, 0, 1]], "2": [[0, 0, 1]]}},
    "circ": [{"m": 2, "n": 2, "i": 1, "matrix": [[0, 0, 1]]},
             {"m": 2, "n": 2, "i": 2, "matrix": [[0, 0, 1]]}],
}


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_trees_census(capsys):
    code, cap = run(capsys, "trees", "--max-arity", "5")
    assert code == 0
    blob = json.loads(cap.out)
    assert blob["tables"] == {"1": {"0": 1}, "2": {"0": 1}, "3": {"0": 4},
                              "4": {"0": 26}, "5": {"0": 236}}


def test_bar_homology_table(capsys):
    code, cap = run(capsys, "bar", "--operad", "com", "--max-arity", "4",
                    "--homology", "--field", "q")
    assert code == 0
    blob = json.loads(cap.out)
    assert blob["tables"] == {"1": {"0": 1}, "2": {"1": 1},
                              "3": {"2": 2}, "4": {"3": 6}}


def test_tsv_output(capsys):
    code, cap = run(capsys, "w", "--operad", "com", "--max-arity", "3",
                    "--out", "tsv")
    assert code == 0
    lines = cap.out.strip().splitlines()
    assert lines[0] == "arity\tdegree\tdim"
    assert "3\t0\t4" in lines and "3\t1\t3" in lines


def test_check_theta(capsys):
    code, cap = run(capsys, "check", "theta", "--operad", "ass",
                    "--max-arity", "3")
    assert code == 0
    blob = json.loads(cap.out)
    assert all(c["pass"] for c in blob["checks"])
    assert any("iso" in c["name"] for c in blob["checks"])


def test_check_w_and_kk(capsys):
    for argv in (("check", "w", "--operad", "com", "--max-arity", "3"),
                 ("kk", "--operad", "com", "--max-arity", "3")):
        code, cap = run(capsys, *argv)
        assert code == 0
        assert all(c["pass"] for c in json.loads(cap.out)["checks"])


def test_determinism(capsys):
    argv = ("check", "theta", "--operad", "com", "--max-arity", "3",
            "--seed", "11")
    out1 = run(capsys, *argv)[1].out
    out2 = run(capsys, *argv)[1].out
    assert out1 == out2


def test_load_operad_spec_matches_builtin(tmp_path):
    f = tmp_path / "com3.json"
    f.write_text(json.dumps(COM3))
    p = load_operad_spec(str(f))
    q = builtin_operad("com", QQ, 3)
    for (m, i, n) in ((2, 1, 2), (2, 2, 2)):
        assert p.circ(m, i, n).matrix(0).data == q.circ(m, i, n).matrix(0).data


def test_load_operad_spec_broken_axiom(tmp_path, capsys):
    bad = json.loads(json.dumps(COM3))
    bad["circ"][1]["matrix"] = [[0, 0, -1]]
    f = tmp_path / "bad.json"
    f.write_text(json.dumps(bad))
    with pytest.raises(CliError, match=r"equivariance \(2,"):
        load_operad_spec(str(f))
    code, cap = run(capsys, "bar", "--operad", f"file:{f}")
    assert code == 2
    assert "equivariance (2," in cap.err


def test_load_operad_spec_differential(tmp_path):
    # a degree-1 generator with d(x) = y loads; d failing d^2 = 0 does not
    blob = {
        "field": {"p": 2}, "max_arity": 2,
        "terms": {"2": {"basis": [{"name": "x", "degree": 1},
                                  {"name": "y", "degree": 0}],
                        "d": [[1, 0, 1]]}},
        "sigma": {"2": {"1": [[0, 0, 1], [1, 1, 1]]}},
        "circ": [],
    }
    f = tmp_path / "dg.json"
    f.write_text(json.dumps(blob))
    p = load_operad_spec(str(f))
    assert p.field.char == 2
    assert p.term(2).dims() == {0: 1, 1: 1}

    blob["terms"]["2"]["basis"].append({"name": "z", "degree": 2})
    blob["terms"]["2"]["d"].append([0, 2, 1])
    blob["sigma"]["2"]["1"].append([2, 2, 1])
    f.write_text(json.dumps(blob))
    with pytest.raises(CliError):
        load_operad_spec(str(f))


def test_generator_selectors(capsys, tmp_path):
    f = tmp_path / "gen.json"
    f.write_text(json.dumps({"gens": {"2": [0]}}))
    code, cap = run(capsys, "koszul", "--operad", f"trivial:{f}",
                    "--max-arity", "3")
    assert code == 0
    assert json.loads(cap.out)["tables"]["3"] == {"-2": 3}
    code, cap = run(capsys, "w", "--operad", f"free:{f}", "--max-arity", "3")
    assert code == 0
    assert json.loads(cap.out)["tables"]["3"] == {"0": 6, "1": 3}


def test_truncate_modifier(capsys):
    code, cap = run(capsys, "bar", "--operad", "ass", "--max-arity", "3",
                    "--truncate", "2")
    assert code == 0
    assert json.loads(cap.out)["tables"]["3"] == {"2": 12}


def test_input_errors(capsys):
    assert run(capsys, "bar", "--operad", "bogus")[0] == 2
    assert run(capsys, "bar", "--operad", "file:/does/not/exist")[0] == 2
    assert run(capsys, "bar", "--field", "f9")[0] == 2


def test_fields_agree_on_homology(capsys):
    tables = []
    for fld in ("q", "f2"):
        code, cap = run(capsys, "bar", "--operad", "ass", "--max-arity", "3",
                        "--homology", "--field", fld)
        assert code == 0
        tables.append(json.loads(cap.out)["tables"])
    assert tables[0] == tables[1]
