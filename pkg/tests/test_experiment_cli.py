import csv
import math

import pytest

from refinement_acting.cli import EXIT_OK, EXIT_SPEC, main
from refinement_acting.experiment import (CSV_COLUMNS, RunSpec, SpecError, execute, read_csv, report_rows, run_grid,
                                          suite_problems, summarize, write_csv)


def _row(**kw):
    base = {"domain": "d", "problem_id": "p0", "run_id": 0, "mode": "upom", "task_id": 0, "success": 1,
            "cost": "1.0", "efficiency": "1.0", "planning_time_s": "", "rollouts": 0, "seed": 0}
    base.update(kw)
    return base


def test_csv_schema_and_roundtrip(tmp_path):
    rows = [_row(run_id=i, efficiency=repr(0.1 * i)) for i in range(3)]
    write_csv(rows, tmp_path / "a.csv")
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == CSV_COLUMNS
    back = read_csv(tmp_path / "a.csv")
    assert [r["efficiency"] for r in back] == [0.0, 0.1, 0.2]
    assert back[0]["planning_time_s"] is None
    write_csv(rows[:1], tmp_path / "a.csv", append=True)
    assert len(read_csv(tmp_path / "a.csv")) == 4


def test_summary_hand_computed(tmp_path):
    effs = [0.2, 0.4, 0.6, 0.0]
    rows = [_row(task_id=i, efficiency=repr(e), success=int(e > 0), planning_time_s=repr(0.5 * i))
            for i, e in enumerate(effs)]
    rows.append(_row(mode="reactive", efficiency="0.5"))
    write_csv(rows, tmp_path / "r.csv")
    by_mode = {s.mode: s for s in summarize(read_csv(tmp_path / "r.csv"))}
    s = by_mode["upom"]
    assert s.n == 4 and s.efficiency == pytest.approx(0.3)
    sd = math.sqrt(sum((e - 0.3) ** 2 for e in effs) / 3)
    assert s.efficiency_ci == pytest.approx(1.96 * sd / 2)
    assert s.success_ratio == pytest.approx(0.75) and s.planning_time == pytest.approx(0.75)
    assert by_mode["reactive"].efficiency_ci == 0.0 and by_mode["reactive"].planning_time is None


def test_read_csv_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    assert read_csv(tmp_path / "empty.csv") == []
    write_csv([_row(), _row()], tmp_path / "bad.csv")
    lines = (tmp_path / "bad.csv").read_text().splitlines()
    lines[2] = lines[2].replace(",1,1.0,", ",yes,1.0,", 1)
    (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(SpecError, match="bad.csv:3"):
        read_csv(tmp_path / "bad.csv")
    (tmp_path / "hdr.csv").write_text("a,b\n1,2\n")
    with pytest.raises(SpecError, match="header"):
        read_csv(tmp_path / "hdr.csv")


def test_grid_is_ordered_and_parallel_safe(domains):
    d = domains("micro-seq")
    pd = suite_problems(d, "s2", 0)[0].to_dict()
    specs = [RunSpec("micro-seq", pd, mode, r, 3, n_ro=20) for mode in ("reactive", "upom") for r in range(3)]
    serial = [report_rows(r) for r in run_grid(specs)]
    assert serial == [report_rows(r) for r in run_grid(specs, workers=2)]
    assert [rows[0]["mode"] for rows in serial] == ["reactive"] * 3 + ["upom"] * 3
    assert serial[0] == report_rows(execute(specs[0]))


def test_suite_sources(domains, tmp_path):
    d = domains("micro-choice")
    assert len(suite_problems(d, "s5", 0, limit=2)) == 2
    with pytest.raises(SpecError):
        suite_problems(d, "nowhere", 0)
    with pytest.raises(SpecError):
        suite_problems(domains("courier"), "s1", 0)


def _cli(*argv):
    return main([str(a) for a in argv])


def test_cli_exit_codes(tmp_path, capsys):
    assert _cli("run", "--domain", "nope", "--mode", "upom") == EXIT_SPEC
    assert _cli("run", "--domain", "fetch", "--mode", "lm1", "--out", tmp_path / "x.csv") == EXIT_SPEC
    assert "need --model" in capsys.readouterr().err
    assert _cli("run", "--domain", "fetch", "--mode", "upom", "--dmax", "0") == EXIT_SPEC
    assert _cli("report", tmp_path / "missing.csv") == EXIT_SPEC
    (tmp_path / "bad.csv").write_text("x\n1\n")
    assert _cli("report", tmp_path / "bad.csv") == EXIT_SPEC
    assert _cli("train", "--domain", "fetch", "--strategy", "lm1", "--data", tmp_path / "missing.jsonl") == EXIT_SPEC


def test_cli_run_single_row(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert _cli("run", "--domain", "micro-choice", "--mode", "upom", "--runs", 1, "--problems", 1,
                "--nro", 50, "--out", out) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 1 and rows[0]["mode"] == "upom" and rows[0]["rollouts"] > 0
    assert "wrote 1 rows" in capsys.readouterr().out
    assert _cli("report", out) == EXIT_OK
    assert "micro-choice" in capsys.readouterr().out


def test_cli_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("REFINEMENT_ACTING_OUTPUT", str(tmp_path / "res"))
    assert _cli("run", "--domain", "micro-seq", "--mode", "reactive", "--runs", 2, "--problems", 1) == EXIT_OK
    assert len(read_csv(tmp_path / "res" / "run.csv")) == 2


def test_cli_gen_and_validate(tmp_path, capsys):
    assert _cli("gen", "--domain", "fetch", "--count", 3, "--seed", 4, "--out", tmp_path / "p") == EXIT_OK
    files = sorted((tmp_path / "p").glob("*.json"))
    assert len(files) == 3
    assert _cli("validate", "--domain", "fetch", *files) == EXIT_OK
    assert _cli("validate") == EXIT_OK
    out = capsys.readouterr().out
    assert "explore: ok" in out and "fingerprint=" in out
    assert _cli("validate", "--domain", "nav", files[0]) == EXIT_SPEC
    out = tmp_path / "r.csv"
    assert _cli("run", "--domain", "fetch", "--suite", tmp_path / "p", "--mode", "reactive", "--runs", 1,
                "--out", out) == EXIT_OK
    assert {r["problem_id"] for r in read_csv(out)} == {f.stem for f in files}


def test_cli_train_and_learned_modes(tmp_path, capsys):
    model = tmp_path / "h.json"
    assert _cli("train", "--domain", "micro-nested", "--strategy", "lh", "--tasks", 5, "--nro", 20,
                "--epochs", 5, "--hidden", 8, "--k", 3, "--records", tmp_path / "r.jsonl", "--out", model) == EXIT_OK
    assert "interval edges" in capsys.readouterr().out
    with open(model.with_suffix(".curves.csv")) as f:
        curves = list(csv.DictReader(f))
    assert len(curves) == 5 and set(curves[0]) == {"epoch", "train_loss", "train_acc", "val_loss", "val_acc"}
    out = tmp_path / "r.csv"
    assert _cli("run", "--domain", "micro-nested", "--mode", "upom+nnH", "--model", model, "--runs", 1,
                "--problems", 1, "--nro", 10, "--dmax", 2, "--out", out) == EXIT_OK
    assert _cli("run", "--domain", "micro-nested", "--mode", "lm1", "--model", model, "--runs", 1,
                "--problems", 1, "--out", out) == EXIT_SPEC
    pol = tmp_path / "p.json"
    assert _cli("train", "--domain", "micro-nested", "--strategy", "lm2", "--tasks", 5, "--nro", 20,
                "--epochs", 5, "--hidden", 8, "--out", pol) == EXIT_OK
    assert _cli("run", "--domain", "micro-nested", "--mode", "lm2", "--model", pol, "--runs", 1,
                "--problems", 1, "--out", out) == EXIT_OK
    assert _cli("run", "--domain", "micro-seq", "--mode", "lm2", "--model", pol, "--runs", 1,
                "--problems", 1, "--out", out) == EXIT_SPEC


def test_cli_is_deterministic(tmp_path):
    for tag in ("a", "b"):
        assert _cli("train", "--domain", "micro-param", "--strategy", "lm2", "--tasks", 4, "--nro", 20,
                    "--epochs", 3, "--hidden", 4, "--seed", 2, "--out", tmp_path / f"{tag}.json") == EXIT_OK
        assert _cli("run", "--domain", "micro-param", "--mode", "upom", "--mode", "reactive", "--runs", 2,
                    "--problems", 2, "--nro", 30, "--seed", 5, "--out", tmp_path / f"{tag}.csv") == EXIT_OK
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
