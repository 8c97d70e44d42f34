"""Command line driver: config handling, outputs, exit codes, determinism."""

import re

import numpy as np
import pytest

from treespec import __version__
from treespec.cli import main


def _read(path):
    return path.read_text().splitlines()


def _data_rows(lines):
    return [ln for ln in lines if ln and not ln.startswith("#")][1:]


def test_sweep_csv_shape_and_determinism(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["sweep", "--out", str(out1)]) == 0
    assert main(["sweep", "--out", str(out2)]) == 0
    lines = _read(out1 / "sweep.csv")
    assert lines[0] == f"# treespec {__version__}"
    assert lines[1] == "# command sweep"
    assert re.fullmatch(r"# config [0-9a-f]{12}", lines[2])
    assert lines[3] == "alpha,e1,truncation,converged"
    rows = _data_rows(lines)
    assert len(rows) == 10
    alphas = [float(r.split(",")[0]) for r in rows]
    assert alphas == sorted(alphas, reverse=True)
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_set_override_and_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment line\n\nd = 1.7\nn_alpha = 6\n")
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["sweep", "--config", str(cfg), "--set", "d=1.5",
                 "--out", str(out1)]) == 0
    assert main(["sweep", "--set", "d=1.5", "--set", "n_alpha=6",
                 "--out", str(out2)]) == 0
    lines1 = _read(out1 / "sweep.csv")
    lines2 = _read(out2 / "sweep.csv")
    assert len(_data_rows(lines1)) == 6
    # --set beats the config file, so both runs resolve to the same config
    assert lines1[2] == lines2[2]


def test_unknown_key_rejected(tmp_path, capsys):
    assert main(["sweep", "--set", "bogus=1", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert re.fullmatch(r'error: kind=validation message="[^"]*"\n?', err)


def test_gamma_two_rejected(tmp_path, capsys):
    assert main(["sweep", "--set", "gamma=2.0", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "kind=validation" in err and "gamma != 2" in err


def test_missing_config_is_io_error(tmp_path, capsys):
    rc = main(["sweep", "--config", str(tmp_path / "nope.cfg"),
               "--out", str(tmp_path)])
    assert rc == 3
    assert "kind=io" in capsys.readouterr().err


def test_unwritable_out_is_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rc = main(["sweep", "--out", str(blocker / "sub")])
    assert rc == 3
    assert "kind=io" in capsys.readouterr().err


def test_fit_footer_and_plot_determinism(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    for out in (out1, out2):
        assert main(["fit", "--plot", "--out", str(out)]) == 0
    lines = _read(out1 / "fit.csv")
    footer = {ln.split()[1]: ln for ln in lines if ln.startswith("# ")}
    assert "law=power" in footer["fit"]
    exponent = float(footer["exponent"].split()[-1])
    assert 1.5 <= exponent <= 3.0
    svg = (out1 / "fit.svg").read_bytes()
    assert svg.startswith(b"<?xml")
    assert svg == (out2 / "fit.svg").read_bytes()


def test_bs_trace_slope_footer(tmp_path):
    assert main(["bs-trace", "--out", str(tmp_path)]) == 0
    lines = _read(tmp_path / "bs-trace.csv")
    slope = float([ln for ln in lines if ln.startswith("# slope")][0].split()[-1])
    assert -0.5 <= slope <= -0.4
    assert len(_data_rows(lines)) == 5


def test_fb_check_all_pass(tmp_path):
    assert main(["fb-check", "--out", str(tmp_path)]) == 0
    rows = _data_rows(_read(tmp_path / "fb-check.csv"))
    table = {r.split(",")[0]: r.split(",")[1:] for r in rows}
    assert set(table) == {"isometry_rel", "round_trip_rel", "diag_residual",
                          "p_tail_fraction"}
    for value, threshold, ok in table.values():
        assert float(value) <= float(threshold)
        assert ok == "1"


def test_tree_bracket_ordering(tmp_path):
    assert main(["tree-bracket", "--set", "height=25.0",
                 "--out", str(tmp_path)]) == 0
    rows = _data_rows(_read(tmp_path / "tree-bracket.csv"))
    lo, tree, reduced, hi = map(float, rows[0].split(","))
    assert lo <= tree <= hi < 0.0
    assert abs(tree - reduced) <= 1e-5 * abs(tree)


def test_bs_correspond_cheap(tmp_path):
    assert main(["bs-correspond", "--set", "alphas=0.2", "--set", "rank=800",
                 "--out", str(tmp_path)]) == 0
    rows = _data_rows(_read(tmp_path / "bs-correspond.csv"))
    assert len(rows) == 1
    alpha, e_shift, mu, mu_alpha = map(float, rows[0].split(","))
    assert alpha == 0.2 and e_shift > 0.0
    assert abs(mu_alpha - 1.0) <= 1e-2
    assert np.isclose(mu * alpha, mu_alpha)


def test_bounds_table(tmp_path):
    assert main(["bounds", "--out", str(tmp_path)]) == 0
    rows = _data_rows(_read(tmp_path / "bounds.csv"))
    assert len(rows) == 2
    for row in rows:
        fields = row.split(",")
        assert fields[1] == "power"
        quotient, constant, ceiling = map(float, fields[2:])
        assert quotient <= ceiling < 0.0 < constant


def test_bounds_table_critical_exponent(tmp_path):
    assert main(["bounds", "--set", "d=1.5", "--set", "gamma=1.5",
                 "--set", "alphas=0.05,0.01", "--out", str(tmp_path)]) == 0
    rows = _data_rows(_read(tmp_path / "bounds.csv"))
    assert [r.split(",")[1] for r in rows] == ["log-corrected"] * 2


def test_rank_validation_exit_code(tmp_path, capsys):
    rc = main(["bs-correspond", "--set", "rank=100", "--out", str(tmp_path)])
    assert rc == 1
    assert "kind=validation" in capsys.readouterr().err
