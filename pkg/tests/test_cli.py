import csv
import io

import numpy as np
import pytest

from ldpdetect import cli
from ldpdetect.cli import RunConfig, main
from ldpdetect.errors import NumericalError


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


class TestRunConfig:
    def test_round_trip(self):
        cfg = RunConfig(command="simulate", param=[0.5, 0.25], snr_db=[0.0, 10.0], detector=["optimal"],
                        b=[0.9, -0.05], n=[32, 64], trials=5000, seed=17, prop1_check=True, sigma2=2.0)
        again = RunConfig.from_text(cfg.to_text())
        assert again == cfg
        assert again.to_text() == cfg.to_text()

    def test_repeated_keys_form_lists(self):
        cfg = RunConfig.from_text("snr_db = 0\nsnr_db = 10\n# comment\n\nseed = 3\n")
        assert cfg.snr_db == [0.0, 10.0] and cfg.seed == 3

    def test_unknown_key(self):
        with pytest.raises(cli.ConfigError, match="colour"):
            RunConfig.from_text("colour = red\n")

    def test_bad_value_names_key(self):
        with pytest.raises(cli.ConfigError, match="trials"):
            RunConfig.from_text("trials = many\n")

    def test_missing_equals(self):
        with pytest.raises(cli.ConfigError, match="line 1"):
            RunConfig.from_text("trials 10\n")


class TestConfigHandling:
    def test_unknown_key_exit_and_no_output(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text("param = 0.5\nbogus_key = 1\n")
        out = tmp_path / "out.csv"
        code, _, err = run(["exponent", "--config", str(config), "-o", str(out)], capsys)
        assert code == 2
        assert "bogus_key" in err
        assert not out.exists()

    def test_invalid_parameter_no_output(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        code, _, err = run(["exponent", "--param", "0.5", "1.5", "-o", str(out)], capsys)
        assert code == 2 and "param" in err
        assert not out.exists()

    def test_flags_override_file(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text("param = 0.9\nparam = 0.3\nsnr_db = 0\n")
        code, text, _ = run(["exponent", "--config", str(config), "--snr-db", "10"], capsys)
        assert code == 0
        _, rows = table(text)
        assert [r[:2] for r in rows] == [["0.9", "10"], ["0.3", "10"]]

    def test_config_for_other_command(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text("command = simulate\n")
        code, _, err = run(["exponent", "--config", str(config)], capsys)
        assert code == 2 and "command" in err

    def test_numerical_failure_exit(self, monkeypatch, capsys):
        def boom(cfg):
            raise NumericalError("no convergence", bracket=(0, 1))

        monkeypatch.setitem(cli.HANDLERS, "exponent", boom)
        code, _, err = run(["exponent", "--param", "0.5"], capsys)
        assert code == 3 and "numerical" in err


class TestExponentCommand:
    def test_gauss_markov_sweep(self, capsys):
        code, text, _ = run(["exponent", "--snr-db", "10"], capsys)
        assert code == 0
        header, rows = table(text)
        assert header == ["param", "snr_db", "E0_optimal", "E1_optimal", "E_optimal", "feasible_optimal",
                          "E0_simple_quadratic", "E1_simple_quadratic", "E_simple_quadratic",
                          "feasible_simple_quadratic"]
        assert len(rows) == 20
        values = np.array([[float(x) for x in r[:5] + r[6:9]] for r in rows])
        np.testing.assert_allclose(values[:, 2], values[:, 3], atol=1e-6)
        first = values[0, [2, 3, 5, 6]]
        np.testing.assert_allclose(first, first[0], atol=1e-9)

    def test_triangular_drop(self, capsys):
        code, text, _ = run(["exponent", "--spectrum", "triangular", "--snr-db", "10"], capsys)
        assert code == 0
        _, rows = table(text)
        assert [r[0] for r in rows] == [str(M) for M in range(1, 11)]
        for col in (4, 8):
            assert float(rows[1][col]) < float(rows[0][col])

    def test_degenerate_flagged(self, capsys):
        code, text, _ = run(["exponent", "--param", "0.5", "--snr-db=-inf"], capsys)
        assert code == 0
        _, rows = table(text)
        assert rows[0][4] == "0" and rows[0][5] == "false"


class TestAreSweepCommand:
    def test_sorted_and_header(self, capsys):
        code, text, _ = run(["are-sweep", "--param", "0.5", "0", "--snr-db", "20", "0"], capsys)
        assert code == 0
        header, rows = table(text)
        assert ",".join(header) == "param,snr_db,E_detector1,E_detector2,ARE,feasible1,feasible2"
        assert [(r[1], r[0]) for r in rows] == [("0", "0"), ("0", "0.5"), ("20", "0"), ("20", "0.5")]
        assert rows[0][4] == "1"

    def test_default_snrs(self, capsys):
        _, text, _ = run(["are-sweep", "--param", "0.3"], capsys)
        _, rows = table(text)
        assert [r[1] for r in rows] == ["0", "10", "20", "30"]

    def test_prop1_check_pass(self, capsys):
        code, text, _ = run(["are-sweep", "--param", "0.5", "--prop1-check"], capsys)
        _, rows = table(text)
        assert code == 0
        assert rows[-1][1] == "40" and float(rows[-1][4]) >= 0.95

    def test_prop1_check_fail(self, capsys):
        code, _, _ = run(["are-sweep", "--param", "0.99", "--snr-db", "0", "--prop1-check"], capsys)
        assert code == 4

    def test_writes_file(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code, text, _ = run(["are-sweep", "--param", "0", "--snr-db", "10", "-o", str(out)], capsys)
        assert code == 0 and text == ""
        assert out.read_text().splitlines()[1] == "0,10,0.333891618675,0.333891618675,1,true,true"


class TestBandedCommand:
    def test_m1_row(self, capsys):
        code, text, _ = run(["banded-optimize", "--param", "0.5", "--snr-db", "10"], capsys)
        assert code == 0
        header, rows = table(text)
        assert header == ["param", "snr_db", "m", "b0", "b1", "E0", "E1", "E", "cells_evaluated",
                          "cells_feasible", "E_optimal", "ARE", "found"]
        assert float(rows[0][11]) >= 0.95 and rows[0][12] == "true"

    def test_m0_white_reproduces_simple(self, capsys):
        b0 = 10 / 11
        args = ["banded-optimize", "--spectrum", "white", "--snr-db", "10", "--m", "0",
                "--b0-lo", repr(b0 / 2), "--b0-hi", repr(1.5 * b0), "--steps", "3", "--refinement-rounds", "0"]
        code, text, _ = run(args, capsys)
        assert code == 0
        _, rows = table(text)
        np.testing.assert_allclose(float(rows[0][3]), b0, rtol=1e-11)
        np.testing.assert_allclose(float(rows[0][10]), 1.0, atol=1e-6)

    def test_m1_not_worse_than_m0(self, capsys):
        common = ["banded-optimize", "--param", "0.3", "0.8", "--snr-db", "0", "--steps", "9"]
        _, text0, _ = run(common + ["--m", "0"], capsys)
        _, text1, _ = run(common + ["--m", "1"], capsys)
        are0 = [float(r[-2]) for r in table(text0)[1]]
        are1 = [float(r[-2]) for r in table(text1)[1]]
        assert all(b >= a - 1e-12 for a, b in zip(are0, are1))

    def test_no_feasible_flagged(self, capsys):
        args = ["banded-optimize", "--param", "0.5", "--snr-db", "10", "--m", "0",
                "--b0-lo", "1e-8", "--b0-hi", "2e-8", "--steps", "3"]
        code, text, _ = run(args, capsys)
        assert code == 0
        _, rows = table(text)
        assert rows[0][-1] == "false" and rows[0][3] == "nan"


class TestSimulateCommand:
    ARGS = ["simulate", "--param", "0.5", "--snr-db", "0", "--n", "16", "32", "--trials", "2000", "--seed", "9"]

    def test_footer_and_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(self.ARGS + ["-o", str(a)]) == 0
        assert main(self.ARGS + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().splitlines()
        assert lines[0] == "n,alpha,alpha_lo,alpha_hi,beta,beta_lo,beta_hi,pe,pe_lo,pe_hi"
        footer = lines[-1].split(",")
        assert len(footer) == 6 and footer[-1] == "true"

    def test_zero_signal(self, capsys):
        code, text, _ = run(["simulate", "--snr-db=-inf", "--n", "16", "--trials", "1000"], capsys)
        assert code == 0
        footer = text.splitlines()[-1].split(",")
        assert footer[3] == "0" and footer[5] == "false"

    def test_too_few_trials(self, capsys):
        code, _, err = run(["simulate", "--n", "16", "--trials", "10"], capsys)
        assert code == 2 and "trials" in err
