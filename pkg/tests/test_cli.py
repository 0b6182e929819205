import csv
import filecmp
import math
from pathlib import Path

import numpy as np
import pytest

from newsfactor import pipeline
from newsfactor.admm import FactorModel
from newsfactor.backtest import read_report_csv
from newsfactor.cli import main
from newsfactor.errors import DivergenceError
from newsfactor.io import atomic_outputs, output_lock, read_matrix_csv, save_model
from newsfactor.pipeline import RunConfig
from support import SPLIT, args, rows, run_all, write_corpus

@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    write_corpus(d)
    return d


@pytest.fixture(scope="module")
def full_run(corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    run_all(corpus_dir, out)
    return out


class TestStages:
    def test_outputs_exist(self, full_run):
        for rel in ("data/returns.csv", "data/mask.csv", "data/intensity.csv", "model/u.csv", "model/w.csv",
                    "model/meta.txt", "model/history.csv", "predict/predictions.csv", "predict/accuracy.csv",
                    "backtest/report.csv", "backtest/values.csv", "report/w_heatmap.csv",
                    "report/u_adjacency.csv", "report/stock_accuracy.csv", "report/cumulative_returns.csv"):
            assert (full_run / rel).is_file(), rel
        assert not (full_run / ".lock").exists()
        assert not list(full_run.rglob(".staging-*"))

    def test_prepare_round_trip_matches_generator(self, tmp_path):
        corpus = write_corpus(tmp_path / "src", seed=3)
        assert main(["prepare", *args(tmp_path / "src", tmp_path / "out")]) == 0
        r, tickers, _ = read_matrix_csv(tmp_path / "out/data/returns.csv")
        y, words, _ = read_matrix_csv(tmp_path / "out/data/intensity.csv")
        assert tickers == corpus.prices.tickers and words == corpus.counts.words
        assert np.allclose(r, corpus.r, atol=1e-12)
        assert np.allclose(y, corpus.y, atol=1e-12)

    def test_prepare_is_byte_identical_on_rerun(self, corpus_dir, tmp_path):
        for out in ("a", "b"):
            assert main(["prepare", *args(corpus_dir, tmp_path / out)]) == 0
        cmp = filecmp.dircmp(tmp_path / "a/data", tmp_path / "b/data")
        assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
        for name in cmp.common_files:
            assert (tmp_path / "a/data" / name).read_bytes() == (tmp_path / "b/data" / name).read_bytes()

    def test_empty_counts_gives_zero_intensity(self, corpus_dir, tmp_path):
        (tmp_path / "counts.csv").write_text("date,word,doc_count\n")
        argv = ["prepare", "--prices", str(corpus_dir / "prices.csv"), "--counts", str(tmp_path / "counts.csv"),
                "--out", str(tmp_path / "out")]
        with pytest.warns(UserWarning, match="no article counts"):
            assert main(argv) == 0
        y, words, _ = read_matrix_csv(tmp_path / "out/data/intensity.csv")
        assert words == [] and not y.any()

    def test_prediction_rows_are_tradable_stock_days(self, full_run):
        mask, _, days = read_matrix_csv(full_run / "data/mask.csv")
        n_test = int(mask[:, 120:].sum())
        assert len(rows(full_run / "predict/predictions.csv")) == n_test

    def test_model_beats_coin_flip_on_synthetic(self, full_run):
        acc = {r["model"]: float(r["accuracy"]) for r in rows(full_run / "predict/accuracy.csv")}
        assert acc["model"] > 0.5
        assert set(acc) == {"model", "previous_x", "previous_r", "ar_x", "ar_r", "regress_x", "regress_r"}

    def test_report_consistency(self, full_run):
        report = {r["strategy"]: r for r in read_report_csv(full_run / "backtest/report.csv")}
        assert set(report) == {"reference", "model", "U-BAH", "U-CBAL", "MVP-BAH", "MVP-CBAL"}
        assert math.isnan(report["reference"]["sharpe"])
        curves = rows(full_run / "report/cumulative_returns.csv")
        last = {}
        for rec in curves:
            last[rec["strategy"]] = float(rec["cumulative_return"])
        for name, rec in report.items():
            assert last[name] == pytest.approx(rec["return"], rel=1e-12)
        adj, _, _ = read_matrix_csv(full_run / "report/u_adjacency.csv")
        assert np.array_equal(np.diag(adj), np.zeros(adj.shape[0]))

    def test_zero_model_holds_cash(self, corpus_dir, full_run, tmp_path):
        model_dir = tmp_path / "zero"
        u, tickers, _ = read_matrix_csv(full_run / "model/u.csv")
        _, _, words = read_matrix_csv(full_run / "model/w.csv")
        save_model(FactorModel(u, np.zeros((u.shape[1], len(words)))), model_dir, tickers, words)
        base = args(corpus_dir, tmp_path / "out", "--data-dir", str(full_run / "data"), "--model-dir", str(model_dir))
        assert main(["predict", *base]) == 0
        assert {r["direction"] for r in rows(tmp_path / "out/predict/predictions.csv")} == {"down"}
        assert main(["backtest", *base]) == 0
        report = {r["strategy"]: r for r in read_report_csv(tmp_path / "out/backtest/report.csv")}
        assert report["model"]["return"] == 1.0
        assert main(["report", *base]) == 0
        heat, _, _ = read_matrix_csv(tmp_path / "out/report/w_heatmap.csv")
        assert not heat.any()

    def test_single_stock_strategy_return(self, tmp_path):
        corpus = write_corpus(tmp_path / "src", seed=5, n=1, m=6)
        out = tmp_path / "out"
        run_all(tmp_path / "src", out, "--baselines", "none")
        up = {r["date"] for r in rows(out / "predict/predictions.csv") if r["direction"] == "up"}
        dates = corpus.prices.dates
        expected = 1.0
        for t, date in enumerate(dates):
            if date in up:
                expected *= corpus.prices.close[0, t] / corpus.prices.open[0, t]
        report = {r["strategy"]: r for r in read_report_csv(out / "backtest/report.csv")}
        assert report["model"]["return"] == pytest.approx(expected, rel=1e-12)


class TestDeterminismAndLookahead:
    def test_end_to_end_byte_identical(self, corpus_dir, full_run, tmp_path):
        run_all(corpus_dir, tmp_path / "again")
        for path in sorted(p for p in full_run.rglob("*") if p.is_file()):
            twin = tmp_path / "again" / path.relative_to(full_run)
            assert twin.read_bytes() == path.read_bytes(), path

    @pytest.mark.parametrize("cut", [121, 135])
    def test_future_data_does_not_move_earlier_predictions(self, corpus_dir, full_run, tmp_path, cut):
        src = tmp_path / "mutated"
        src.mkdir()
        dates = sorted({r["date"] for r in rows(corpus_dir / "prices.csv")})
        boundary = dates[cut]  # predictions for days <= cut must not change
        with open(src / "prices.csv", "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["date", "ticker", "open", "close"])
            for r in rows(corpus_dir / "prices.csv"):
                scale = 3.0 if r["date"] > boundary else 1.0
                out.writerow([r["date"], r["ticker"], float(r["open"]) * scale, float(r["close"]) * scale])
        with open(src / "counts.csv", "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["date", "word", "doc_count"])
            for r in rows(corpus_dir / "counts.csv"):
                bump = 500 if r["date"] > boundary else 0
                out.writerow([r["date"], r["word"], int(r["doc_count"]) + bump])
        (src / "reference.csv").write_bytes((corpus_dir / "reference.csv").read_bytes())
        out_dir = tmp_path / "out"
        assert main(["prepare", *args(src, out_dir)]) == 0
        assert main(["predict", *args(src, out_dir, "--model-dir", str(full_run / "model"))]) == 0
        changed_after = False
        for name in sorted(p.name for p in (full_run / "predict").glob("predictions*.csv")):
            before = [r for r in rows(full_run / "predict" / name)]
            after = [r for r in rows(out_dir / "predict" / name)]
            assert [r for r in after if r["date"] <= boundary] == [r for r in before if r["date"] <= boundary], name
            changed_after |= after != before
        assert changed_after  # the mutation itself was visible


class TestErrors:
    def test_missing_required_path_is_config_error(self, tmp_path):
        assert main(["prepare", "--out", str(tmp_path / "o")]) == 2

    def test_bad_flag_value_is_config_error(self, corpus_dir, tmp_path):
        assert main(["train", *args(corpus_dir, tmp_path / "o"), "--rho", "-1"]) == 2
        assert main(["train", "--out", str(tmp_path / "o"), "--split", "1,2,3"]) == 2

    def test_malformed_csv_is_data_error(self, tmp_path, capsys):
        (tmp_path / "p.csv").write_text("date,ticker,open,close\nD0,A,1,2\nD1,A,oops,2\n")
        (tmp_path / "c.csv").write_text("date,word,doc_count\n")
        code = main(["prepare", "--prices", str(tmp_path / "p.csv"), "--counts", str(tmp_path / "c.csv"),
                     "--out", str(tmp_path / "o")])
        assert code == 3
        assert ":3:" in capsys.readouterr().err
        assert not (tmp_path / "o/data/returns.csv").exists()

    def test_missing_model_is_data_error(self, full_run, tmp_path):
        code = main(["predict", "--data-dir", str(full_run / "data"), "--model-dir", str(tmp_path / "none"),
                     "--out", str(tmp_path / "o"), "--split", SPLIT])
        assert code == 3

    def test_divergence_is_numerical_error(self, corpus_dir, tmp_path, monkeypatch):
        # log returns from real prices are bounded, so the breakdown is injected at the solver
        def blow_up(*a, **k):
            raise DivergenceError("non-finite iterate", iteration=3)

        out = tmp_path / "o"
        assert main(["prepare", *args(corpus_dir, out)]) == 0
        monkeypatch.setattr(pipeline, "fit", blow_up)
        assert main(["train", *args(corpus_dir, out)]) == 4
        assert not (out / "model").exists()

    def test_failed_backtest_writes_nothing(self, corpus_dir, full_run, tmp_path):
        (tmp_path / "ref.csv").write_text("date,value\nD00000,1.0\n")
        base = ["--data-dir", str(full_run / "data"), "--model-dir", str(full_run / "model"),
                "--out", str(tmp_path / "o"), "--split", SPLIT, "--reference", str(tmp_path / "ref.csv")]
        assert main(["backtest", *base]) == 3
        assert not list((tmp_path / "o").rglob("*.csv"))

    def test_lock_blocks_concurrent_run(self, corpus_dir, tmp_path):
        out = tmp_path / "o"
        with output_lock(out):
            assert main(["prepare", *args(corpus_dir, out)]) == 1
        assert main(["prepare", *args(corpus_dir, out)]) == 0

    def test_report_needs_backtest(self, full_run, tmp_path):
        code = main(["report", "--data-dir", str(full_run / "data"), "--model-dir", str(full_run / "model"),
                     "--out", str(tmp_path / "o"), "--split", SPLIT])
        assert code == 3


class TestConfig:
    def test_file_with_flag_override(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("# comment\nlambda=0.5\nd=4\nsplit=10,20\nbaselines=ar_r,previous_x\n\nrho = 2\n")
        cfg = RunConfig.from_file(cfg_file, {"d": 7})
        assert (cfg.lam, cfg.d, cfg.rho, cfg.split) == (0.5, 7, 2.0, (10, 20))
        assert cfg.baselines == ("ar_r", "previous_x")

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ValueError):
            RunConfig.from_mapping({"colour": "blue"})

    def test_cli_reads_config(self, corpus_dir, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(f"prices={corpus_dir / 'prices.csv'}\ncounts={corpus_dir / 'counts.csv'}\n"
                            f"out={tmp_path / 'o'}\nwindow=20\n")
        assert main(["prepare", "--config", str(cfg_file)]) == 0
        assert (tmp_path / "o/data/returns.csv").exists()
        assert main(["prepare", "--config", str(tmp_path / "missing.cfg")]) == 2

    def test_default_split_and_paths(self):
        cfg = RunConfig(out="x")
        assert cfg.data_path == Path("x/data") and cfg.model_path == Path("x/model")
        with pytest.raises(ValueError):
            RunConfig(baselines=("nope",))


def test_atomic_outputs_leave_nothing_on_error(tmp_path):
    target = tmp_path / "t"
    with pytest.raises(RuntimeError):
        with atomic_outputs(target) as tmp:
            (tmp / "partial.csv").write_text("x")
            raise RuntimeError("boom")
    assert list(target.iterdir()) == []
