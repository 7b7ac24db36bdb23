import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from sphere_approx import cli
from sphere_approx.cli import COLUMNS, ConfigError, ExperimentConfig, load_config_text, main
from sphere_approx.counting import DirectionSet
from sphere_approx.dynamics import ChainResult


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    body = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(body))))


def test_count_north_pole(capsys):
    code, out, _ = run(["count", "--n", "1", "--c", "0.5", "--T", "3,5", "--alpha", "explicit:0,1"], capsys)
    assert code == 0
    r = rows(out)
    assert r[0] == COLUMNS["count"](1)
    for line in r[1:]:
        T = float(line[2])
        assert int(line[5]) == math.ceil(math.cosh(T)) - 1 == int(line[7])


def test_count_determinism(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        p = tmp_path / name
        assert main(["count", "--n", "2", "--c", "0.5,1.5", "--T", "2,4", "--alpha", "random:4", "--seed", "17", "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    p = tmp_path / "c.csv"
    main(["count", "--n", "2", "--c", "0.5,1.5", "--T", "2,4", "--alpha", "random:4", "--seed", "18", "--out", str(p)])
    assert p.read_bytes() != outs[0]


def test_empty_T_grid_is_header_only(capsys):
    code, out, _ = run(["count", "--T", ""], capsys)
    assert code == 0
    lines = out.splitlines()
    assert [l for l in lines if not l.startswith("#")] == [",".join(COLUMNS["count"](1))]
    assert lines[0].startswith("# sphere_approx") and any(l.startswith("# config_hash=") for l in lines)


@pytest.mark.parametrize(
    "argv",
    [
        ["count", "--n", "4"],
        ["count", "--c", "-1"],
        ["count", "--T", "5,3"],
        ["count", "--alpha", "explicit:1,1"],
        ["count", "--alpha", "random:0"],
        ["count", "--alpha", "sideways:3"],
        ["count", "--lattice", "bogus"],
        ["spiral", "--n", "2", "--A", "orthant(+,+,+)"],
        ["count", "--seed", "-3"],
        ["orbit", "--r", "0"],
        ["nonsense"],
        ["count", "--config", "/nonexistent/cfg.txt"],
    ],
)
def test_configuration_errors(argv, capsys):
    assert main(argv) == 2


def test_io_error(capsys):
    code, _, err = run(["count", "--T", "2", "--out", "/nonexistent/dir/out.csv"], capsys)
    assert code == 2 and "/nonexistent/dir/out.csv" in err


def test_schema_for_every_command(capsys):
    cmds = {
        "count": ["--n", "2", "--T", "2,3", "--alpha", "random:2"],
        "sweep": ["--n", "1", "--c", "1,2", "--T", "4,5,6", "--alpha", "random:3"],
        "spiral": ["--n", "2", "--c", "1.5", "--T", "5", "--alpha", "random:2"],
        "volume": ["--n", "2", "--T", "2", "--mc-samples", "2000", "--A", "hemisphere(1,0)"],
        "orbit": ["--n", "2", "--T", "4,5", "--lattice", "u_y:0.3,0.3"],
        "calibrate": ["--n", "2", "--c", "1,2", "--T", "6", "--samples", "5"],
    }
    for cmd, extra in cmds.items():
        code, out, _ = run([cmd] + extra, capsys)
        assert code == 0, cmd
        r = rows(out)
        n = int(extra[extra.index("--n") + 1])
        assert r[0] == COLUMNS[cmd](n)
        assert len(r) > 1 and all(len(line) == len(r[0]) for line in r)


def test_sweep_rows(capsys):
    _, out, _ = run(["sweep", "--n", "1", "--c", "1,2", "--T", "4,6,8", "--alpha", "random:3"], capsys)
    r = rows(out)[1:]
    kinds = [line[0] for line in r]
    assert kinds.count("target") == 6 and kinds.count("aggregate") == 2 and kinds.count("ratio") == 1
    assert r[-1][-1] == "expected_2.0"


def test_sweep_flags(capsys):
    _, out, _ = run(["sweep", "--n", "1", "--T", "5", "--alpha", "random:1"], capsys)
    assert rows(out)[1][-1] == "slope_undefined"
    # c tiny and T small: nothing to count
    _, out, _ = run(["sweep", "--n", "2", "--c", "0.01", "--T", "0.5,1,1.5", "--alpha", "random:2"], capsys)
    r = rows(out)[1:]
    assert r[0][-1] == "all_zero" and r[-1][-1] == "flagged"


def test_spiral_fractions(capsys):
    _, out, _ = run(["spiral", "--n", "2", "--c", "1.5", "--T", "6", "--alpha", "random:3", "--A", "hemisphere(1,2) complement(hemisphere(1,2)) full"], capsys)
    r = rows(out)[1:]
    fr = [float(line[6]) for line in r]
    assert fr[0] + fr[1] == pytest.approx(1, abs=1e-15) and fr[2] == 1.0
    assert int(r[0][4]) + int(r[1][4]) == int(r[0][5])


def test_orbit_chain_row(capsys):
    code, out, _ = run(["orbit", "--n", "1", "--c", "1", "--r", "1", "--T", "8"], capsys)
    line = rows(out)[1]
    inner, integral, outer = int(line[6]), float(line[7]), int(line[8])
    assert code == 0 and inner <= integral <= outer


def test_orbit_violation_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "orbit_chain_check", lambda cfg: ChainResult(5, 1.0, 3, 0.0, 5, 0, 1.0))
    code, _, err = run(["orbit", "--T", "4"], capsys)
    assert code == 1 and "violation" in err


def test_selftest(capsys):
    code, out, _ = run(["selftest"], capsys)
    assert code == 0
    assert all(line[1] == "PASS" for line in rows(out)[1:])


def test_selftest_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "selftest_checks", lambda seed: [("x", True, ""), ("y", False, "broken")])
    assert run(["selftest"], capsys)[0] == 1


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# a comment\nn = 2\nc = 0.5, 1.0\nT = 2,3\nalpha = explicit:0,0,1\nseed=5  # trailing\n")
    code, out, _ = run(["count", "--config", str(cfg), "--c", "0.5"], capsys)
    assert code == 0
    r = rows(out)[1:]
    assert len(r) == 2 and all(line[1] == "0.5" for line in r)
    assert "# seed=5" in out


def test_config_text_parsing():
    c = load_config_text("n=2\nA=quadrants\nlattice=g_t:0.5\nkappa=0.4\nr=2\n")
    assert c.n == 2 and len(c.direction_sets) == 4 and c.kappa == 0.4 and c.r == 2.0
    assert c.validate().lattice_descriptor().n == 2
    with pytest.raises(ConfigError):
        load_config_text("n 2\n")
    with pytest.raises(ConfigError):
        load_config_text("colour=blue\n")


def test_config_hash_tracks_content():
    a = ExperimentConfig(n=2, c_list=(1.0,))
    b = ExperimentConfig(n=2, c_list=(1.0,))
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != ExperimentConfig(n=2, c_list=(1.5,)).config_hash()


def test_random_targets_are_unit_and_seeded():
    t1 = ExperimentConfig(n=3, alpha_count=5, seed=9).targets()
    t2 = ExperimentConfig(n=3, alpha_count=5, seed=9).targets()
    assert all(np.array_equal(a, b) for a, b in zip(t1, t2))
    assert all(abs(np.linalg.norm(a) - 1) < 1e-15 for a in t1)


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "sphere_approx", "count", "--T", "2", "--alpha", "explicit:0,1"], capture_output=True, text=True)
    assert p.returncode == 0 and "total" in p.stdout
