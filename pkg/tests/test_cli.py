import json

import pytest

from mg1socp.cli import EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def inst_file(tmp_path, capsys):
    path = tmp_path / "inst.json"
    assert main(["gen", "--preset", "desk-small", "--seed", "1", "-o", str(path)]) == EXIT_OK
    capsys.readouterr()
    return path


def test_gen_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["gen", "--seed", "3", "-o", str(a)])
    main(["gen", "--seed", "3", "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert str(a) in capsys.readouterr().out


def test_gen_bad_preset(capsys):
    assert main(["gen", "--preset", "nope"]) == EXIT_USAGE
    assert "mg1socp gen:" in capsys.readouterr().err


@pytest.mark.parametrize("f", ["1", "2", "3", "4"])
def test_solve_every_formulation(inst_file, capsys, f):
    assert main(["solve", str(inst_file), "-f", f, "-q"]) == EXIT_OK
    rec = json.loads(capsys.readouterr().out.splitlines()[0])
    assert rec["verified"] and rec["status"] == "Optimal"
    assert rec["evaluated"] == pytest.approx(118.41957887, rel=1e-8)


def test_solve_relaxed_m2_rejected(inst_file, capsys):
    assert main(["solve", str(inst_file), "-f", "2", "--relax-binaries"]) == EXIT_USAGE


def test_solve_missing_file(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "none.json")]) == EXIT_USAGE
    assert "no such instance" in capsys.readouterr().err


def test_oracle(inst_file, capsys):
    assert main(["oracle", str(inst_file)]) == EXIT_OK
    assert "118.41957887" in capsys.readouterr().out


def test_oracle_too_large(tmp_path, capsys):
    path = tmp_path / "big.json"
    main(["gen", "--preset", "vj-large", "-o", str(path)])
    assert main(["oracle", str(path)]) == EXIT_LIMIT


def test_export_stable(inst_file, tmp_path, capsys):
    a, b = tmp_path / "a.cbf", tmp_path / "b.cbf"
    assert main(["export", str(inst_file), "-o", str(a)]) == EXIT_OK
    assert main(["export", str(inst_file), "-o", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert "Q 3" in lines


def test_export_unwritable(inst_file, tmp_path, capsys):
    assert main(["export", str(inst_file), "-o", str(tmp_path / "no" / "dir" / "x.cbf")]) == EXIT_USAGE


def test_simulate(capsys):
    assert main(["simulate", "--lam", "1", "--mu", "2", "--customers", "200000", "--seed", "1"]) == EXIT_OK
    assert "inside" in capsys.readouterr().out


def test_simulate_unstable(capsys):
    assert main(["simulate", "--lam", "2", "--mu", "2"]) == EXIT_INFEASIBLE


def test_simulate_needs_sigma(capsys):
    assert main(["simulate", "--lam", "1", "--mu", "2", "--dist", "uniform"]) == EXIT_USAGE


def test_bench_csv(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    assert main(["bench", "--preset", "desk-small", "--count", "2", "--csv", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("instance,formulation,status")
    assert len(lines) == 1 + 2 * 4


def test_bench_nothing(capsys):
    assert main(["bench"]) == EXIT_USAGE
