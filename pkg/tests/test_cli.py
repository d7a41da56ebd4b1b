import json
import subprocess
import sys
from pathlib import Path

import pytest

from nucfrag.cli import main
from nucfrag.experiment import ExperimentConfig, read_summaries, run_sweep, summaries_csv

ROOT = Path(__file__).resolve().parents[1]


def cfg_dict(**over):
    d = json.loads((ROOT / "configs" / "minimal.json").read_text())
    d.update(over)
    return d


def write_cfg(tmp_path, **over):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg_dict(**over)))
    return path


def test_minimal_config_one_row(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_summaries(tmp_path / "o" / "summary.csv")
    assert len(rows) == 1 and rows[0].N == 200 and rows[0].T_scaled > 0


def test_repeat_runs_are_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, replications=3, N_list=[50, 100])
    for out in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / out)]) == 0
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_worker_count_does_not_change_output():
    cfg = ExperimentConfig.from_dict(cfg_dict(replications=6, N_list=[40, 80]))
    one = summaries_csv(r.summary for r in run_sweep(cfg, workers=1))
    three = summaries_csv(r.summary for r in run_sweep(cfg, workers=3))
    assert one == three


def test_float_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(cfg_dict(replications=4))
    res = run_sweep(cfg)
    p = tmp_path / "s.csv"
    p.write_text(summaries_csv(r.summary for r in res))
    back = read_summaries(p)
    assert [b.T_N for b in back] == [r.summary.T_N for r in res]
    assert p.read_text().splitlines()[0].split(",") == list(
        ["replication_id", "seed", "N", "T_N", "T_scaled", "L_delta", "L_scaled", "half_time", "explosion_span", "event_count", "truncated"]
    )


@pytest.mark.parametrize(
    "over,field",
    [
        ({"delta": 1.5}, "delta"),
        ({"N_list": [400, 200]}, "N_list"),
        ({"N_list": []}, "N_list"),
        ({"replications": 0}, "replications"),
        ({"mode": "partial"}, "mode"),
        ({"stop": {"kind": "forever"}}, "stop"),
        ({"bogus": 1}, "bogus"),
        ({"model": {"n_c": 4, "lambda": [1, 1, 1], "mu": [1, 1]}}, "model"),
        ({"model": {"n_c": 4, "lambda": [1, 1, 1], "mu": [1, 1, 1], "fragmentation": "BF:2"}}, "model.fragmentation.p"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, over, field):
    cfg = write_cfg(tmp_path, **over)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert field in capsys.readouterr().err


def test_json_syntax_error_names_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "N_list": [200],\n  "delta": ,\n}')
    assert main(["simulate", "--config", str(path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_validate_missing_and_empty_inputs(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["validate", "--config", str(cfg), "--summaries", str(tmp_path / "nope.csv")]) == 3
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["validate", "--config", str(cfg), "--summaries", str(empty)]) == 3
    header_only = tmp_path / "header.csv"
    header_only.write_text("replication_id,seed,N,T_N,T_scaled,L_delta,L_scaled,half_time,explosion_span,event_count,truncated\n")
    assert main(["validate", "--config", str(cfg), "--summaries", str(header_only)]) == 3


def test_validate_report_has_one_record_per_test(tmp_path, capsys):
    tests = ["ks_exponential", "mean_T", "cv_T", "poisson_stream", "balance_decay", "lag_scaling"]
    cfg = write_cfg(
        tmp_path, replications=25, N_list=[60, 120],
        validate={"tests": tests, "poisson": {"N": 60, "replications": 20, "horizon": 2.0},
                  "balance": {"N_list": [40, 80], "replications": 5, "horizon": 0.5}},
    )
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    report = tmp_path / "r.jsonl"
    assert main(["validate", "--config", str(cfg), "--summaries", str(out / "summary.csv"), "--report", str(report)]) == 0
    recs = [json.loads(line) for line in report.read_text().splitlines()]
    assert [r["name"] for r in recs] == tests
    assert all(set(r) >= {"name", "statistic", "threshold", "pass"} for r in recs)
    table = capsys.readouterr().out
    assert all(t in table for t in tests)


def test_fragcheck_moment_identity(capsys):
    assert main(["fragcheck", "--spec", "UF", "--kmin", "2", "--kmax", "12"]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    ks = [r for r in rows if "k" in r]
    assert [r["k"] for r in ks] == list(range(2, 13))
    assert all(r["identity_ok"] for r in ks)
    assert rows[-1]["check"] == "A4"


def test_mminf_level_one(capsys):
    assert main(["mminf", "--arrival", "2", "--service", "1", "--level", "1", "--xi", "0.5", "--paths", "20000"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["closed_form"] == pytest.approx(1 / (1 + 0.5 / 2))
    assert abs(row["simulated"] - row["closed_form"]) < 4 * row["std_error"]


def test_branching_without_fragmentation(capsys):
    assert main(["branching", "--alpha", "1", "--mu", "0", "--nc", "4", "--reps", "5", "--horizon", "3"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["survival_prob"] == 1.0


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nucfrag.cli", "branching", "--alpha", "1", "--mu", "0", "--nc", "4", "--reps", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["survival_prob"] == 1.0
