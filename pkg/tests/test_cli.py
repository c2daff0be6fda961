import csv
import json

import numpy as np
import pytest

from hpsmg.cli import (
    CSV_COLUMNS,
    ConfigError,
    RunConfig,
    format_table,
    main,
    parse_sweep,
    run_experiment,
    run_sweep,
)
from hpsmg.problems import read_field

SMALL = ["--elements", "4", "--degree", "6"]


@pytest.mark.parametrize("kw", [
    dict(problem="nope"),
    dict(mode="fast"),
    dict(ppw=9.6, kappa=10.0),
    dict(ppw=1.5),
    dict(kappa=-1.0),
    dict(n=6),
    dict(n=1),
    dict(N=1),
    dict(tol=2.0),
    dict(depth=1),
    dict(depth=5, n=4),
    dict(gamma=0),
    dict(coarse_iters=0),
    dict(mode="direct", gamma=2),
    dict(mode="unpreconditioned", depth=3),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw).validate()


def test_defaults():
    c = RunConfig().validate()
    assert (c.ppw, c.depth, c.gamma, c.coarse_iters) == (9.6, 2, 1, 4)
    assert c.wavenumber == pytest.approx(2 * np.pi * 8 * 16 / 9.6)
    assert RunConfig(mode="exact-coarse", n=8).validate().depth == 6


@pytest.mark.parametrize("mode", ["direct", "mg", "unpreconditioned", "exact-coarse"])
def test_modes_reach_tolerance(mode):
    report, row, _ = run_experiment(RunConfig(n=4, N=6, mode=mode))
    assert report.converged and row["final_residual"] <= 1e-8
    if mode == "exact-coarse":
        assert row["iters"] == 1


def test_modes_agree_on_the_field():
    fields = [run_experiment(RunConfig(n=4, N=6, mode=m, tol=1e-12), want_field=True)[2]
              for m in ("direct", "mg")]
    np.testing.assert_allclose(fields[0].values, fields[1].values, atol=1e-9)


def test_single_run_exit_and_output(capsys, tmp_path):
    out = tmp_path / "r.json"
    field = tmp_path / "u.npz"
    assert main(SMALL + ["--levels", "3", "--report", str(out), "--dump-field", str(field)]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["converged"] and row["levels"] == 3
    doc = json.loads(out.read_text())
    assert doc["schema"] == "hpsmg-report" and doc["version"] == 1
    assert doc["rows"][0]["iters"] == row["iters"]
    assert read_field(field).values.shape == (16, 45)


def test_non_convergence_exit_code(capsys):
    assert main(SMALL + ["--mode", "unpreconditioned", "--max-iters", "3"]) == 1


def test_config_error_exit_code(capsys):
    assert main(SMALL + ["--levels", "9"]) == 2
    assert "levels must lie" in capsys.readouterr().err
    assert main(SMALL + ["--sweep", "levels=2", "--gamma", "2"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["--ppw", "9", "--kappa", "3"])
    assert exc.value.code == 2


def test_parse_sweep():
    assert parse_sweep("levels=2-4;gamma=1;ci=4,5,6") == ([2, 3, 4], [1], [4, 5, 6])
    assert parse_sweep("coarse-iters=2") == ([2], [1], [2])
    for bad in ("", "depth=3", "levels=", "levels=a"):
        with pytest.raises((ConfigError, ValueError)):
            parse_sweep(bad)


def test_single_cell_sweep_matches_single_run():
    base = RunConfig(n=4, N=6)
    rows, extra = run_sweep(base, [3], [2], [3])
    _, row, _ = run_experiment(RunConfig(n=4, N=6, depth=3, gamma=2, coarse_iters=3))
    assert len(rows) == 1 and not extra
    for key in ("levels", "gamma", "coarse_iters", "iters", "pmem_bytes"):
        assert rows[0][key] == row[key]
    assert rows[0]["final_residual"] == pytest.approx(row["final_residual"], rel=1e-6)


def test_sweep_csv_and_table(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(SMALL + ["--sweep", "levels=2-3;gamma=1;ci=2,4", "--report", str(out), "--baselines"])
    assert code == 0
    text = capsys.readouterr().out
    assert "unpreconditioned" in text and "exact-coarse" in text
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == CSV_COLUMNS
    assert [(r["levels"], r["coarse_iters"]) for r in rows] == [("2", "2"), ("2", "4"), ("3", "2"), ("3", "4")]


def test_sweep_records_failed_cells():
    rows, _ = run_sweep(RunConfig(n=4, N=6, max_iters=1), [2], [1], [1])
    assert not rows[0]["converged"]
    table = format_table(rows)
    assert "*" in table.splitlines()[1]


def test_report_write_failure_is_clear(tmp_path):
    with pytest.raises(OSError, match="cannot write report"):
        main(SMALL + ["--report", str(tmp_path / "no" / "r.json")])
