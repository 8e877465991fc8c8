import shutil

import pandas as pd
import pytest

from bayesnbs.cli import build_parser, main
from bayesnbs.harness import CSV_COLUMNS


class TestParser:

    def test_bench_defaults(self):
        args = build_parser().parse_args(["bench", "--n", "10", "20"])
        assert args.n == [10, 20]
        assert args.algo == ["screening"] and args.dist == ["standard"]
        assert args.budget is None and args.seed is None and args.n_jobs == 1

    def test_unknown_algorithm(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["simulate", "--algo", "quicksort"])

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestSimulate:

    def test_naive_with_budget(self, capsys):
        assert main(["simulate", "--algo", "naive", "--dist", "noiseless", "--n", "64", "--budget", "6",
                     "--seed", "1"]) == 0
        out = capsys.readouterr().out
        assert "good: True" in out
        assert "bisection:" in out
        assert "seed:" not in out

    def test_fixed_crossing(self, capsys):
        assert main(["simulate", "--dist", "noiseless", "--n", "64", "--crossing", "17", "--seed", "3"]) == 0
        assert "answer: 17" in capsys.readouterr().out

    def test_prints_seed(self, capsys):
        assert main(["simulate", "--algo", "naive", "--dist", "noiseless", "--n", "16", "--budget", "4"]) == 0
        assert capsys.readouterr().out.startswith("seed: ")

    def test_missing_budget(self, capsys):
        assert main(["simulate", "--algo", "kk_mw", "--n", "64", "--seed", "0"]) == 2
        assert "--budget" in capsys.readouterr().err

    def test_invalid_instance(self, capsys):
        assert main(["simulate", "--dist", "wide", "--n", "10", "--seed", "0"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_coin_file_with_sentinels(self, tmp_path, capsys):
        path = tmp_path / "coins.txt"
        path.write_text("0\n0\n0\n")
        with pytest.warns(UserWarning):
            status = main(["simulate", "--algo", "naive", "--coins", str(path), "--budget", "3", "--seed", "0"])
        assert status == 0
        out = capsys.readouterr().out
        assert "padded:" in out
        assert "answer: 4" in out and "good: True" in out

    def test_missing_coin_file(self, tmp_path, capsys):
        assert main(["simulate", "--coins", str(tmp_path / "none.txt"), "--seed", "0"]) == 2
        assert "error:" in capsys.readouterr().err


class TestBench:

    def test_csv_output(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        status = main(["bench", "--algo", "naive", "kk_mw", "--dist", "noiseless", "--n", "64", "--budget", "6",
                       "600", "--trials", "4", "--seed", "0", "--out", str(out)])
        assert status == 0
        frame = pd.read_csv(out)
        assert list(frame.columns) == CSV_COLUMNS
        assert list(frame["algorithm"]) == ["naive", "naive", "kk_mw", "kk_mw"]
        assert list(frame["budget"]) == [6, 600, 6, 600]
        assert frame.loc[frame["algorithm"] == "naive", "successes"].tolist() == [4, 4]
        out_text = capsys.readouterr().out
        assert "predicted=851" in out_text
        assert "predicted=14843" in out_text


class TestCalibrate:

    def test_noiseless_transition(self, tmp_path, capsys):
        out = tmp_path / "cal.csv"
        assert main(["calibrate", "--dist", "noiseless", "--n", "64", "--seed", "4", "--out", str(out)]) == 0
        assert "lower=6 upper=6" in capsys.readouterr().out
        frame = pd.read_csv(out)
        assert frame.loc[0, "lower_budget"] == 6 and frame.loc[0, "upper_budget"] == 6


class TestSearch:

    def test_missing_placeholder(self, capsys):
        assert main(["search", "--cmd", "echo hello", "--n", "4"]) == 2
        assert "placeholder" in capsys.readouterr().err

    def test_failing_command(self, capsys):
        assert main(["search", "--cmd", "/nonexistent/bayesnbs-coin {coin}", "--n", "4"]) == 2

    @pytest.mark.slow
    @pytest.mark.skipif(shutil.which("test") is None, reason="needs the test utility")
    def test_external_threshold(self, capsys):
        cmd = "%s {coin} -gt 3" % shutil.which("test")
        assert main(["search", "--cmd", cmd, "--n", "8"]) == 0
        assert "coins 3 and 4 bracket the threshold" in capsys.readouterr().out
