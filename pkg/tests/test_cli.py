import csv
import subprocess
import sys

import pytest

from qansim.cli import eval_angle, main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, name, *argv):
    out = tmp_path / f"{name}.csv"
    assert main([*argv, "--out", str(out)]) == 0
    return out


def test_detect_grid(tmp_path):
    out = run(tmp_path, "d", "detect", "--n", "4", "--pz", "0.1,0.3,0.45", "--kmax", "9", "--trials", "50", "--seed", "42")
    data = rows(out)
    assert len(data) == 27
    assert list(data[0]) == ["pz", "k", "trials", "detections", "prob", "stderr"]


def test_anonymity_rows_and_support(tmp_path):
    data = rows(run(tmp_path, "a", "anonymity", "--trials", "200", "--seed", "1"))
    assert len(data) == 4 * 16
    for f in range(4):
        mine = [r for r in data if r["flipper_index"] == str(f)]
        assert sum(float(r["probability"]) for r in mine) == pytest.approx(1.0, abs=1e-9)
        assert all(float(r["probability"]) == 0 for r in mine if r["outcome"].count("1") % 2 == 0)


def test_compare_rows(tmp_path):
    data = rows(run(tmp_path, "c", "compare", "--trials", "100", "--seed", "3"))
    assert len(data) == 18
    assert {r["accounting"] for r in data} == {"equalized"}
    zero = rows(run(tmp_path, "z", "compare", "--trials", "50", "--seed", "3", "--p1", "0", "--p2", "0"))
    assert all(float(r["fp_rate"]) == 0 for r in zero)


def test_attack_rows(tmp_path):
    data = rows(run(tmp_path, "p", "attack", "--model", "poison", "--prob", "0,0.25,0.5,1.0", "--trials", "60", "--seed", "5"))
    assert [r["param"] for r in data] == ["0.0000000000", "0.2500000000", "0.5000000000", "1.0000000000"]
    ls = rows(run(tmp_path, "l", "attack", "--model", "last-speaker", "--goal", "suppress", "--trials", "40", "--seed", "5"))
    assert float(ls[0]["missed_rate"]) == 1.0
    sh = rows(run(tmp_path, "s", "attack", "--model", "semi-honest", "--trials", "40", "--seed", "5"))
    assert sh[0]["false_notify_rate"] == "NA"


def test_quanet_rows(tmp_path):
    data = rows(run(tmp_path, "q", "quanet", "bundled:compromised", "--seed", "1"))
    assert len(data) == 6
    flagged = next(r for r in data if r["mode"] == "FlaggedHeaders" and r["class"] == "Private")
    bypass = next(r for r in data if r["mode"] == "QanBypass" and r["class"] == "Private")
    assert flagged["delivered"] == "0" and bypass["delivered"] == bypass["sent"]


@pytest.mark.parametrize(
    "argv",
    [
        ["detect", "--seed", "1", "--trials", "20", "--kmax", "3"],
        ["anonymity", "--seed", "1", "--trials", "20", "--backend", "trajectory"],
        ["compare", "--seed", "1", "--trials", "20", "--kmax", "3"],
        ["attack", "--model", "poison", "--seed", "1", "--trials", "10", "--prob", "0.5"],
        ["quanet", "bundled:compromised", "--seed", "9"],
        ["selftest"],
    ],
)
def test_byte_identical_reruns(tmp_path, argv):
    a, b = tmp_path / "a.out", tmp_path / "b.out"
    assert main([*argv, "--out", str(a)]) == 0
    assert main([*argv, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["detect", "--trials", "0", "--seed", "1"],
        ["detect", "--trials", "5"],
        ["attack", "--model", "gremlin", "--seed", "1"],
        ["compare", "--p1", "2", "--seed", "1"],
        ["detect", "--seed", "abc"],
    ],
)
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_missing_config_exit_and_stderr(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "qansim", "quanet", str(tmp_path / "nope.toml"), "--seed", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode != 0
    assert proc.stdout == ""
    assert "nope.toml" in proc.stderr


def test_malformed_config_names_key(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('[topology]\nhosts=["a"]\ngateway="g"\nfoo=1\n')
    assert main(["quanet", str(p), "--seed", "1"]) != 0
    assert "topology.foo" in capsys.readouterr().err


def test_stdout_only_data(capsys):
    assert main(["detect", "--seed", "1", "--trials", "5", "--kmax", "2", "--pz", "0.5"]) == 0
    cap = capsys.readouterr()
    assert cap.out.splitlines()[0] == "pz,k,trials,detections,prob,stderr"
    assert cap.err == ""


def test_eval_angle():
    import math

    assert eval_angle("pi") == pytest.approx(math.pi)
    assert eval_angle("pi/2") == pytest.approx(math.pi / 2)
    assert eval_angle("2pi") == pytest.approx(2 * math.pi)
    assert eval_angle("0.5") == 0.5
