import csv
import io
import os
import subprocess
import sys

import numpy as np
import pytest

from nilmetry.cli import build_parser, list_builtins, run


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_list(capsys):
    code, out, _ = invoke(capsys, "list")
    assert code == 0
    assert "heisenberg3" in out and "quaternion_heisenberg" in out
    titles = [line[:-1] for line in out.splitlines() if not line.startswith(" ")]
    assert titles == sorted(titles)
    assert out == list_builtins()


def test_qi_example(capsys):
    code, out, _ = invoke(capsys, "qi", "--group", "heisenberg3", "--map", "shear(abs)",
                          "--metric", "dh", "--seed", "7")
    assert code == 0
    table = rows(out)
    assert [r["direction"] for r in table] == ["forward", "inverse"]
    assert all(r["violations"] == "0" and r["seed"] == "7" for r in table)


def test_qi_violation_exit_code(capsys):
    code, out, err = invoke(capsys, "qi", "--map", "shear(abs)", "--seed", "1",
                            "--claimed", "0.5,0", "--samples", "2000")
    assert code == 2 and "violated" in err
    assert int(rows(out)[0]["violations"]) > 0


def test_cone_example(capsys):
    code, out, _ = invoke(capsys, "cone", "--group", "heisenberg3", "--map", "shear(abs)",
                          "--scales", "1,0.1,0.01", "--seed", "7")
    assert code == 0
    sups = [float(r["sup_distance"]) for r in rows(out)]
    assert len(sups) == 3 and sups[0] > sups[1] > sups[2]
    assert all(r["pass"] == "true" for r in rows(out))


def test_foliation_example(capsys):
    code, out, _ = invoke(capsys, "foliation", "--map", "Flambda:2", "--z", "4+4i",
                          "--t-max", "1e6", "--seed", "7", "--samples", "301")
    assert code == 0
    table = rows(out)
    assert len(table) == 6 and all(float(r["pi_diameter"]) > 0 for r in table)


def test_lift_command(capsys):
    code, out, _ = invoke(capsys, "lift", "--planar", "paper_example", "--z", "1+2i",
                          "--t-max", "100", "--seed", "1", "--samples", "51")
    assert code == 0
    assert float(rows(out)[0]["pi_diameter"]) == 0.0


def test_triangle_and_ballbox(capsys):
    code, out, _ = invoke(capsys, "triangle", "--group", "abelian(3)", "--seed", "2",
                          "--samples", "500")
    assert code == 0 and float(rows(out)[0]["value"]) == pytest.approx(1.0)
    code, out, _ = invoke(capsys, "ballbox", "--group", "abelian(2)", "--seed", "2",
                          "--samples", "20", "--shape", "box", "--radius", "5", "--budget", "30")
    assert code == 0 and float(rows(out)[0]["value"]) >= 1.0


@pytest.mark.parametrize("argv", [
    ["qi", "--map", "shear(abs)"],
    ["qi", "--map", "shear(abs)", "--seed", "1", "--bogus"],
    ["qi", "--seed", "1"],
    ["qi", "--map", "warp(1)", "--seed", "1"],
    ["cone", "--map", "shear(abs)", "--seed", "1", "--scales", "0.1,1"],
    ["qi", "--group", "nonesuch", "--map", "id", "--seed", "1"],
    ["frobnicate"],
])
def test_usage_errors(capsys, argv):
    code, _, err = invoke(capsys, *argv)
    assert code == 1 and err


def test_config_and_precedence(capsys, tmp_path):
    conf = tmp_path / "run.yaml"
    conf.write_text("kind: cone\ngroup: heisenberg3\nmap: shear(abs)\nseed: 3\nscales: 1,0.5\n")
    code, out, _ = invoke(capsys, "cone", "--config", str(conf))
    assert code == 0 and len(rows(out)) == 2
    code, out, _ = invoke(capsys, "cone", "--config", str(conf), "--scales", "1,0.5,0.25")
    assert code == 0 and len(rows(out)) == 3
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: 1\ncolour: blue\n")
    assert invoke(capsys, "cone", "--config", str(bad))[0] == 1
    assert invoke(capsys, "qi", "--config", str(conf))[0] == 1


def test_out_file(capsys, tmp_path):
    path = tmp_path / "r.csv"
    code, out, _ = invoke(capsys, "triangle", "--seed", "4", "--samples", "300", "--out", str(path))
    assert code == 0 and out == ""
    assert path.read_text().startswith("quantity,value,samples,seed,witness")


def test_help_lists_flags():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, p in sub.items():
        text = p.format_help()
        for action in p._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)


@pytest.mark.parametrize("argv", [
    ["qi", "--map", "shear(power:0.5)", "--seed", "13", "--samples", "9000"],
    ["triangle", "--group", "filiform3", "--seed", "13", "--samples", "9000"],
])
def test_byte_identical_across_threads(tmp_path, argv):
    outputs = []
    for threads in ("1", "8", "8"):
        env = dict(os.environ, NILMETRY_THREADS=threads)
        path = tmp_path / f"out{threads}.csv"
        subprocess.run([sys.executable, "-m", "nilmetry", *argv, "--out", str(path)],
                       env=env, check=True)
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
