import csv
import json

import numpy as np
import pytest

from matrixgames import cli, complexity, dataio, neural
from matrixgames.games import Permutation, games_from_json
from matrixgames.solvers import pure_nash


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Small corpus run end to end: generate, simulate, aggregate."""
    root = tmp_path_factory.mktemp("cli")
    games = root / "games.json"
    trials = root / "trials.csv"
    records = root / "records.csv"
    assert cli.main([
        "generate", "--seed", "5", "--quotas", "1,1,1",
        "--base-total", "126", "--out", str(games),
    ]) == 0
    assert cli.main([
        "simulate", "--games", str(games), "--model", "L1+QR",
        "--eta-self", "0.5", "--participants", "30", "--seed", "3",
        "--out", str(trials),
    ]) == 0
    assert cli.main([
        "aggregate", "--trials", str(trials), "--games", str(games),
        "--out", str(records),
    ]) == 0
    return {"root": root, "games": games, "trials": trials, "records": records}


def _read_csv(path):
    with open(path) as fh:
        comments, rows = [], []
        for line in fh:
            if line.startswith("#"):
                comments.append(line.rstrip("\n"))
            else:
                rows.append(line)
    parsed = list(csv.reader(rows))
    return comments, parsed[0], parsed[1:]


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--version"])
        assert exc.value.code == 0
        assert "matrixgames" in capsys.readouterr().out

    def test_no_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2

    def test_bad_flag_value(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["correlate", "--records", "r", "--games", "g",
                      "--index", "i", "--target", "speed", "--out", "o"])
        assert exc.value.code == 2

    def test_config_hash_deterministic(self):
        parser = cli.build_parser()
        argv = ["classify", "--games", "a.json", "--out", "b.csv"]
        h1 = cli.config_hash(parser.parse_args(argv))
        h2 = cli.config_hash(parser.parse_args(argv))
        assert h1 == h2 and len(h1) == 12
        other = parser.parse_args(["classify", "--games", "c.json", "--out", "b.csv"])
        assert cli.config_hash(other) != h1


class TestGenerate:
    def test_corpus_file(self, pipeline):
        games, meta = games_from_json(pipeline["games"].read_text())
        assert len(games) == 252
        assert meta["command"] == "generate"
        assert meta["seed"] == 5
        assert meta["payoff_max"] == 50
        assert len(meta["config_hash"]) == 12

    def test_rerun_is_byte_identical(self, pipeline, capsys):
        out = pipeline["root"] / "again.json"
        argv = ["generate", "--seed", "5", "--quotas", "1,1,1",
                "--base-total", "126", "--out", str(out)]
        assert cli.main(argv) == 0
        first = out.read_bytes()
        assert cli.main(argv) == 0
        assert out.read_bytes() == first
        assert "252 game instances" in capsys.readouterr().out

    def test_infeasible_total_exits_3(self, pipeline, capsys):
        rc = cli.main(["generate", "--seed", "1", "--base-total", "100",
                       "--out", str(pipeline["root"] / "x.json")])
        assert rc == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "QuotaInfeasible" and err["command"] == "generate"


class TestReports:
    def test_classify(self, pipeline):
        out = pipeline["root"] / "classes.csv"
        assert cli.main(["classify", "--games", str(pipeline["games"]),
                         "--out", str(out)]) == 0
        comments, header, rows = _read_csv(out)
        assert header == ["id", "row_graph", "col_graph",
                          "row_canonical", "col_canonical", "dominance"]
        assert len(rows) == 252
        assert comments and "command=classify" in comments[0]
        assert "config_hash=" in comments[0]
        assert {r[5] for r in rows} == {"double", "single", "non"}

    def test_solve(self, pipeline):
        out = pipeline["root"] / "solutions.csv"
        assert cli.main(["solve", "--games", str(pipeline["games"]),
                         "--out", str(out)]) == 0
        _, header, rows = _read_csv(out)
        assert header == ["id", "pure_equilibria", "mixed_p_A", "mixed_q_C", "degenerate"]
        games, _ = games_from_json(pipeline["games"].read_text())
        by_id = {g.id: g for g in games}
        for r in rows[:20]:
            want = pure_nash(by_id[r[0]])
            got = r[1].split(";") if r[1] else []
            assert len(got) == len(want)
            if r[2]:
                assert 0.0 < float(r[2]) < 1.0

    def test_features(self, pipeline):
        out = pipeline["root"] / "features.csv"
        assert cli.main(["features", "--games", str(pipeline["games"]),
                         "--out", str(out)]) == 0
        _, header, rows = _read_csv(out)
        assert header == ["id", *complexity.FEATURE_NAMES]
        assert len(rows) == 252
        games, _ = games_from_json(pipeline["games"].read_text())
        want = complexity.compute_features(games[0]).as_array()
        got = np.array([float(v) for v in rows[0][1:]])
        assert np.array_equal(got, want)


class TestFit:
    def test_recovers_generating_precision(self, pipeline):
        out = pipeline["root"] / "fit.json"
        assert cli.main(["fit", "--records", str(pipeline["records"]),
                         "--games", str(pipeline["games"]),
                         "--model", "L1+QR", "--seed", "0",
                         "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["model"] == "L1+QR"
        assert doc["params"]["eta_self"] == pytest.approx(0.5, rel=0.2)
        assert doc["train_mse"] < 0.05
        assert len(doc["theta"]) == 1
        assert doc["meta"]["command"] == "fit"

    def test_neural_model_is_usage_error(self, pipeline, capsys):
        rc = cli.main(["fit", "--records", str(pipeline["records"]),
                       "--games", str(pipeline["games"]),
                       "--model", "L1+nQR", "--out",
                       str(pipeline["root"] / "no.json")])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "InvalidSpec" and err["command"] == "fit"

    def test_missing_games_file_exits_3(self, pipeline, capsys):
        rc = cli.main(["classify", "--games", str(pipeline["root"] / "nope.json"),
                       "--out", str(pipeline["root"] / "no.csv")])
        assert rc == 3
        assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"

    def test_unknown_game_exits_3(self, pipeline, capsys):
        bad = pipeline["root"] / "bad_trials.csv"
        dataio.write_trials(bad, [
            dataio.TrialRecord("p1", "zz99", "row", Permutation(False, False), "first", 100),
        ])
        rc = cli.main(["aggregate", "--trials", str(bad),
                       "--games", str(pipeline["games"]),
                       "--out", str(pipeline["root"] / "no.csv")])
        assert rc == 3
        assert json.loads(capsys.readouterr().err)["error"] == "UnknownGame"


class TestCv:
    def test_model_comparison_table(self, pipeline):
        out = pipeline["root"] / "cv.csv"
        assert cli.main(["cv", "--records", str(pipeline["records"]),
                         "--games", str(pipeline["games"]),
                         "--models", "Nash,L1+QR", "--rounds", "2",
                         "--seed", "0", "--out", str(out)]) == 0
        _, header, rows = _read_csv(out)
        assert header == ["model", "mean_mse", "se_mse", "mean_r2", "se_r2"]
        table = {r[0]: [float(v) for v in r[1:]] for r in rows}
        assert set(table) == {"Nash", "L1+QR"}
        assert table["L1+QR"][0] < table["Nash"][0]  # generating model wins


class TestTrainIndexCorrelate:
    def test_full_neural_pipeline(self, pipeline):
        root = pipeline["root"]
        ckpt = root / "model.npz"
        metrics = root / "metrics.json"
        assert cli.main(["train", "--records", str(pipeline["records"]),
                         "--games", str(pipeline["games"]),
                         "--model", "L1+nQR", "--hidden", "8",
                         "--lr", "0.01", "--max-epochs", "30",
                         "--eval-interval", "10", "--patience", "3",
                         "--seed", "0", "--out", str(ckpt),
                         "--metrics-out", str(metrics)]) == 0
        m = json.loads(metrics.read_text())
        assert m["model"] == "L1+nQR"
        assert m["best_epoch"] <= m["stopped_epoch"]
        loaded = neural.load_checkpoint(ckpt)
        assert isinstance(loaded, neural.AugmentedModel)

        # the generating precision is a single scalar, so the learned slot is
        # nearly flat; a small penalty keeps the surviving structure nonzero
        index_path = root / "index.json"
        assert cli.main(["index", "--checkpoint", str(ckpt),
                         "--games", str(pipeline["games"]),
                         "--lam", "1e-4", "--out", str(index_path)]) == 0
        idx = complexity.index_from_json(index_path.read_text())
        assert np.all(np.isfinite(idx.weights))
        assert idx.weight_map()  # at least one active feature

        corr = root / "corr.json"
        assert cli.main(["correlate", "--records", str(pipeline["records"]),
                         "--games", str(pipeline["games"]),
                         "--index", str(index_path), "--target", "rt",
                         "--out", str(corr)]) == 0
        doc = json.loads(corr.read_text())
        assert doc["target"] == "rt" and doc["n"] == 252
        assert -1.0 <= doc["r"] <= 1.0 and 0.0 <= doc["p"] <= 1.0

    def test_train_direct_checkpoint(self, pipeline):
        ckpt = pipeline["root"] / "direct.npz"
        assert cli.main(["train", "--records", str(pipeline["records"]),
                         "--games", str(pipeline["games"]),
                         "--model", "direct", "--hidden", "8,8",
                         "--max-epochs", "30", "--eval-interval", "10",
                         "--out", str(ckpt)]) == 0
        assert isinstance(neural.load_checkpoint(ckpt), neural.MLPParams)

    def test_index_rejects_direct_checkpoint(self, pipeline, capsys):
        ckpt = pipeline["root"] / "plain.npz"
        neural.save_direct(ckpt, neural.init_params(
            neural.MLPConfig(hidden=(4,), head="prob"), seed=0))
        rc = cli.main(["index", "--checkpoint", str(ckpt),
                       "--games", str(pipeline["games"]),
                       "--out", str(pipeline["root"] / "no.json")])
        assert rc == 2
        assert json.loads(capsys.readouterr().err)["error"] == "InvalidSpec"

    def test_constant_target_exits_4(self, pipeline, capsys):
        games, _ = games_from_json(pipeline["games"].read_text())
        flat = pipeline["root"] / "flat_records.csv"
        dataio.write_records(flat, [
            dataio.GameRecord(g, "row", 10, 0.5, rt_norm=0.25) for g in games[:5]
        ])
        index_path = pipeline["root"] / "default_index.json"
        index_path.write_text(complexity.index_to_json(complexity.default_index()))
        rc = cli.main(["correlate", "--records", str(flat),
                       "--games", str(pipeline["games"]),
                       "--index", str(index_path), "--target", "rt",
                       "--out", str(pipeline["root"] / "no.json")])
        assert rc == 4
        assert json.loads(capsys.readouterr().err)["error"] == "ZeroVariance"


class TestPsychometric:
    def test_table_layout(self, pipeline):
        index_path = pipeline["root"] / "idx.json"
        index_path.write_text(complexity.index_to_json(complexity.default_index()))
        out = pipeline["root"] / "psycho.csv"
        assert cli.main(["psychometric", "--records", str(pipeline["records"]),
                         "--games", str(pipeline["games"]),
                         "--index", str(index_path), "--bins", "4",
                         "--out", str(out)]) == 0
        comments, header, rows = _read_csv(out)
        assert header == ["group", "bin", "deu_mean", "p_first_mean", "se", "n"]
        assert any("split_threshold=" in c for c in comments)
        groups = {r[0] for r in rows}
        assert groups == {"low", "high"}
        assert sum(int(r[5]) for r in rows) == 252
        for r in rows:
            assert 0.0 <= float(r[3]) <= 1.0
