import csv
import json
import time

import pytest

from rrgrowth import cli
from rrgrowth.words import IdentityCheck, a_count, classes_up_to


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- words ---------------------------------------------------------------------------


def test_words_table(tmp_path, capsys):
    assert run(tmp_path, "words", "-d", "2", "-k", "2") == 0
    rows = read_csv(tmp_path / "words.csv")
    assert [r["word"] for r in rows] == ["1 1", "1 2", "1 2'", "2 2"]
    assert sum(int(r["mu"]) for r in rows) == 4
    assert sum(int(r["orbit"]) for r in rows) == a_count(2, 2)
    assert "sum mu = 4" in capsys.readouterr().out


def test_words_identities_single_class(tmp_path):
    assert run(tmp_path, "words", "-d", "1", "-k", "5", "--identities") == 0
    doc = json.loads((tmp_path / "words_identities.json").read_text())
    assert doc["passed"] and all(g["passed"] for g in doc["gates"])


def test_words_identities_d3_k7(tmp_path):
    t0 = time.time()
    assert run(tmp_path, "words", "-d", "3", "-k", "7", "--identities") == 0
    assert time.time() - t0 < 60


def test_words_identity_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "identity_checks", lambda d, k, b: [IdentityCheck("sum mu", d, k, False)])
    assert run(tmp_path, "words", "-d", "2", "-k", "2", "--identities") == cli.EXIT_EXACT_FAIL


def test_words_budget_exit_code(tmp_path):
    assert run(tmp_path, "words", "-d", "3", "-k", "12", "--budget", "1000") == cli.EXIT_BUDGET


# -- usage ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nosuch"],
        ["words", "-d", "x"],
        ["words", "-d", "0"],
        ["grow", "-t", "-1"],
        ["limit", "-L", "2", "--max-len", "3"],
        ["tvscan", "--n", "50,25"],
        ["tvscan", "-r", "3"],
        ["oulimit", "--d", "5,2"],
        ["compare", "--threads", "0"],
    ],
)
def test_usage_errors(tmp_path, argv):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv else argv) == cli.EXIT_USAGE


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 3\nreplicas = 7\n[words]\nd = 1\nk = 2\n')
    out = tmp_path / "o"
    assert cli.main(["words", "--config", str(cfg), "-k", "3", "--out", str(out)]) == 0
    rows = read_csv(out / "words.csv")
    assert [r["word"] for r in rows] == ["1 1 1"]
    cfg.write_text("[words]\nbogus = 1\n")
    assert cli.main(["words", "--config", str(cfg)]) == cli.EXIT_USAGE
    cfg.write_text("not toml [")
    assert cli.main(["words", "--config", str(cfg)]) == cli.EXIT_USAGE


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUTPUT, str(tmp_path / "env"))
    monkeypatch.setenv(cli.ENV_THREADS, "2")
    args = cli.parse_args(["words"])
    assert args.out == str(tmp_path / "env") and args.threads == 2
    args = cli.parse_args(["words", "--threads", "1", "--out", "x"])
    assert args.out == "x" and args.threads == 1
    monkeypatch.setenv(cli.ENV_THREADS, "many")
    assert cli.main(["words"]) == cli.EXIT_USAGE


# -- grow ----------------------------------------------------------------------------


def test_grow_at_time_zero_gives_empty_graph(tmp_path):
    assert run(tmp_path, "grow", "-d", "2", "-t", "0", "--emit", "snapshot") == 0
    doc = json.loads((tmp_path / "grow_snapshot.json").read_text())
    assert doc["replicas"][0]["graph"] == {"d": 2, "n": 0, "perms": [[], []]}


def test_grow_paths_csv(tmp_path):
    assert run(tmp_path, "grow", "-d", "2", "-t", "3", "-K", "3", "--replicas", "2", "--emit", "both") == 0
    raw = (tmp_path / "grow_paths.csv").read_bytes()
    assert raw.startswith(b"replica,t,n,k,count\r\n")
    rows = read_csv(tmp_path / "grow_paths.csv")
    snap = json.loads((tmp_path / "grow_snapshot.json").read_text())
    for rec in snap["replicas"]:
        mine = [r for r in rows if int(r["replica"]) == rec["replica"]]
        assert [float(r["t"]) for r in mine] == sorted(float(r["t"]) for r in mine)
        assert float(mine[-1]["t"]) == 3.0 and int(mine[-1]["n"]) == rec["graph"]["n"]
        # consecutive emissions differ in some count, except the closing rows at t_end
        blocks = [tuple(int(r["count"]) for r in mine[i : i + 3]) for i in range(0, len(mine), 3)]
        assert all(a != b for a, b in zip(blocks[:-2], blocks[1:-1]))


def test_grow_path_mode_matches_snapshot_mode(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["grow", "-t", "4", "-K", "2", "--replicas", "3", "--emit", "both", "--seed", "5", "--out", str(a)]) == 0
    assert cli.main(["grow", "-t", "4", "-K", "2", "--replicas", "3", "--emit", "snapshot", "--seed", "5", "--out", str(b)]) == 0
    assert (a / "grow_snapshot.json").read_bytes() == (b / "grow_snapshot.json").read_bytes()


def test_grow_resume_continues_identically(tmp_path):
    base = ["grow", "-d", "2", "-K", "3", "--replicas", "2", "--emit", "snapshot", "--seed", "4"]
    assert cli.main(base + ["-t", "2", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["grow", "--resume", str(tmp_path / "a" / "grow_snapshot.json"), "-t", "4", "-K", "3", "--emit", "snapshot", "--out", str(tmp_path / "b")]) == 0
    assert cli.main(base + ["-t", "4", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "b" / "grow_snapshot.json").read_bytes() == (tmp_path / "c" / "grow_snapshot.json").read_bytes()
    assert cli.main(["grow", "--resume", str(tmp_path / "a" / "grow_snapshot.json"), "-t", "1", "--out", str(tmp_path / "x")]) == cli.EXIT_USAGE


def test_grow_terminal_means(tmp_path):
    assert run(tmp_path, "grow", "-d", "2", "-t", "7", "-K", "4", "--replicas", "1000", "--emit", "snapshot", "--seed", "1") == 0
    doc = json.loads((tmp_path / "grow.json").read_text())
    assert len(doc["rows"]) == 4
    assert all(abs(r["z"]) < 3 for r in doc["rows"])


def test_outputs_identical_across_thread_counts(tmp_path):
    for cmd in (["grow", "-t", "3", "-K", "3", "--replicas", "6", "--emit", "both"], ["tvscan", "--n", "20,40", "--samples", "10000"]):
        a, b = tmp_path / "t1", tmp_path / "t3"
        assert cli.main(cmd + ["--threads", "1", "--out", str(a)]) == 0
        assert cli.main(cmd + ["--threads", "3", "--out", str(b)]) == 0
        for f in a.iterdir():
            assert f.read_bytes() == (b / f.name).read_bytes()


# -- limit, compare, tvscan, oulimit ---------------------------------------------------


def test_limit_stationarity(tmp_path):
    assert run(tmp_path, "limit", "-d", "2", "-L", "12", "-T", "2", "--check", "stationarity") == 0
    doc = json.loads((tmp_path / "limit.json").read_text())
    assert len(doc["gates"]) == 2 * len(classes_up_to(2, 3))
    assert doc["config"]["times"] == [0.0, 2.0] and len(doc["config_hash"]) == 16


def test_limit_gate_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli.st, "chi_square_poisson", lambda x, m: (99.0, 0.0, 3))
    assert run(tmp_path, "limit", "-L", "3", "-T", "1", "--replicas", "200") == cli.EXIT_STAT_FAIL


def test_limit_paths(tmp_path):
    assert run(tmp_path, "limit", "-d", "2", "-L", "5", "-T", "1", "--check", "none", "--emit", "paths", "--path-replicas", "2", "--dt", "0.5") == 0
    rows = read_csv(tmp_path / "limit_paths.csv")
    assert {r["t"] for r in rows} <= {"0.0", "0.5", "1.0"}
    assert {r["replica"] for r in rows} == {"0", "1"}


def test_compare_small(tmp_path):
    assert run(tmp_path, "compare", "-d", "2", "-K", "2", "-s", "5", "-t", "0,0.5", "--replicas", "1500", "--seed", "2") == 0
    doc = json.loads((tmp_path / "compare.json").read_text())
    assert any("cov" in r["statistic"] for r in doc["rows"])
    assert (tmp_path / "compare.txt").read_text().startswith("# graph_vs_limit")


def test_tvscan_small(tmp_path):
    assert run(tmp_path, "tvscan", "-d", "2", "-r", "2", "--n", "25,100", "--samples", "40000", "--seed", "3") == 0
    doc = json.loads((tmp_path / "tvscan.json").read_text())
    assert doc["config"]["samples"] == [40000, 640000]
    assert [g["passed"] for g in doc["gates"]] == [True, True]


def test_oulimit_small(tmp_path):
    assert run(tmp_path, "oulimit", "--d", "2,5", "-k", "1,2", "--replicas", "10000", "--seed", "1") == 0
    doc = json.loads((tmp_path / "oulimit.json").read_text())
    assert len(doc["rows"]) == 8
