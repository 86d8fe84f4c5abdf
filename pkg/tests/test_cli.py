import csv

import pytest

from pagealloc.cli import main
from pagealloc.workloads import read_script, verify_adversarial

SMALL = """\
env.page_size = 10
workload.size_range = 1,4
train.agent = dqn
train.total_timesteps = 1500
eval.sessions = 2
eval.rollouts = 5
run.seed = 5
"""

BF_EXAMPLE = """\
page_size=10 label=bf_good seed=none
A 3 A
A 1 B
A 2 C
A 1 D
A 3 E
F A
F C
A 2 X
A 3 Y
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_gen_workload(tmp_path):
    out = tmp_path / "scripts"
    assert main(["gen-workload", "wf_good", "--page-size", "64", "--count", "5",
                 "--seed", "1", "--out", str(out)]) == 0
    files = sorted(out.iterdir())
    assert [f.name for f in files] == [f"wf_good_{i:04d}.txt" for i in range(5)]
    for f in files:
        script = read_script(f)
        assert verify_adversarial(script).matches("wf_good")


def test_gen_workload_generation_error(tmp_path):
    code = main(["gen-workload", "bf_good", "--page-size", "4", "--out", str(tmp_path)])
    assert code == 4


def test_inspect(tmp_path, capsys):
    path = tmp_path / "ex.txt"
    path.write_text(BF_EXAMPLE)
    assert main(["inspect", str(path)]) == 0
    assert "best: OK, first: FAIL@7, worst: FAIL@7" in capsys.readouterr().out
    path.write_text("page_size=10 label=bf_good seed=none\nA 1 A\nF Q\n")
    assert main(["inspect", str(path)]) == 4
    assert main(["inspect", str(tmp_path / "missing.txt")]) == 3


def test_train_eval_round(tmp_path, config, capsys):
    run = tmp_path / "run"
    assert main(["train", "--config", str(config), "--output-dir", str(run)]) == 0
    assert {p.name for p in run.iterdir()} == {"policy.json", "train_log.csv", "run-manifest.cfg"}
    assert list(read_rows(run / "train_log.csv")[0]) == ["episode", "steps", "return"]
    manifest = (run / "run-manifest.cfg").read_text()
    assert "train.total_timesteps = 1500" in manifest and "run.seed = 5" in manifest

    ev = tmp_path / "ev"
    args = ["eval", str(run / "policy.json"), "--page-size", "10", "--size-range", "1,4",
            "--rollouts", "5", "--sessions", "2", "--seed", "1", "--output-dir", str(ev)]
    assert main(args) == 0
    rows = read_rows(ev / "summary.csv")
    assert len(rows) == 8 and {r["policy"] for r in rows} == {"dqn", "first_fit", "best_fit", "worst_fit"}
    assert len(read_rows(ev / "aggregate.csv")) == 4
    assert len(read_rows(ev / "episodes.csv")) == 40

    assert main(["eval", str(run / "policy.json"), "--page-size", "12"]) == 2
    assert main(["eval", str(tmp_path / "nope.json")]) == 3
    (tmp_path / "corrupt.json").write_text("{")
    assert main(["eval", str(tmp_path / "corrupt.json")]) == 3


def test_config_error_names_fields(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("workload.p_free = 0.5\nworkload.p_alloc = 0.6\n")
    assert main(["train", "--config", str(path), "--output-dir", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "workload.p_free" in err and "workload.p_alloc" in err


def test_baselines_only(tmp_path):
    out = tmp_path / "bo"
    assert main(["eval", "--baselines-only", "--mode", "mixed", "--page-size", "64",
                 "--rollouts", "3", "--seed", "0", "--output-dir", str(out)]) == 0
    assert [r["policy"] for r in read_rows(out / "summary.csv")] == ["first_fit", "best_fit", "worst_fit"]


def test_bench(tmp_path, config):
    out = tmp_path / "bench"
    assert main(["bench", "--config", str(config), "--output-dir", str(out)]) == 0
    rows = read_rows(out / "aggregate.csv")
    assert [r["policy"] for r in rows] == ["dqn", "first_fit", "best_fit", "worst_fit"]
    assert all(r["n"] == "10" for r in rows)
