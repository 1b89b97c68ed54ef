import csv
import io

import pytest

from mid_detect import __version__, cli
from mid_detect.analytic import calibrate_tau


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


ROC_HEADER = ("alpha,tau,p_fa_analytic,p_d_analytic,p_fa_mc,p_fa_ci,p_d_mc,p_d_ci,"
              "p_d_onebit,p_d_onebit_ci,p_d_glrt,p_d_glrt_ci")


class TestRoc:
    def test_analytic_only_is_byte_identical(self, capsys):
        code, a, _ = run(capsys, "roc", "--trials", "0")
        _, b, _ = run(capsys, "roc", "--trials", "0")
        assert code == 0 and a == b
        assert ROC_HEADER in a.splitlines()
        rows = table(a)
        assert len(rows) == len(cli.DEFAULT_ALPHAS)
        assert all(r["p_fa_mc"] == "" and r["p_d_glrt_ci"] == "" for r in rows)
        assert float(rows[2]["tau"]) == pytest.approx(calibrate_tau(0.05, 1.0, 50), rel=1e-11)
        assert float(rows[2]["p_fa_analytic"]) == pytest.approx(0.05, rel=1e-11)

    def test_config_echo(self, capsys):
        _, out, _ = run(capsys, "roc", "--trials", "0", "--alpha", "0.1,0.2")
        head = [line for line in out.splitlines() if line.startswith("#")]
        assert head[0] == f"# mid_detect {__version__}"
        assert "# alpha=0.1,0.2" in head and "# k=8" in head and "# mode=roc" in head

    def test_monte_carlo_columns_and_worker_identity(self, capsys, tmp_path):
        args = ["roc", "--k", "5", "--dm", "4", "--d", "2", "--alpha", "0.1,0.3", "--trials", "3000", "--seed", "9"]
        run(capsys, *args, "--out", str(tmp_path / "a.csv"))
        run(capsys, *args, "--workers", "3", "--out", str(tmp_path / "b.csv"))
        a = (tmp_path / "a.csv").read_bytes()
        assert a == (tmp_path / "b.csv").read_bytes()
        rows = table(a.decode())
        assert all(r["p_d_glrt"] != "" and float(r["p_fa_ci"]) > 0 for r in rows)

    def test_unsorted_alphas_rejected(self, capsys):
        code, _, err = run(capsys, "roc", "--trials", "0", "--alpha", "0.2,0.1")
        assert code == 2 and "alpha" in err


class TestConfig:
    def test_file_and_flag_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# settings\nk = 6\ndm=5\nd = 1\nalpha = 0.05, 0.1\nsigma-s = 2.0\n")
        _, out, _ = run(capsys, "calibrate", "--config", str(cfg), "--dm", "7", "--trials", "0")
        assert "# k=6" in out and "# dm=7" in out and "# sigma_s=2" in out
        rows = table(out)
        assert [float(r["alpha"]) for r in rows] == [0.05, 0.1]
        assert float(rows[0]["tau"]) == pytest.approx(calibrate_tau(0.05, 1.0, 7), rel=1e-11)

    def test_preset_then_flags(self):
        cfg = cli.resolve_config("roc", {"preset": "fig2", "trials": 0, "d": 5})
        assert (cfg.k, cfg.dm, cfg.d, cfg.trials) == (12, 150, 5, 0)
        assert cli.resolve_config("snr", {"preset": "fig3"}).alpha == (0.05, 0.01)

    @pytest.mark.parametrize("text", ["k 8", "colour = red", "k = eight"])
    def test_bad_config_text(self, text):
        with pytest.raises(cli.ConfigError):
            cli.parse_config_text(text)

    def test_invalid_parameters_name_the_field(self, capsys):
        code, _, err = run(capsys, "roc", "--k", "3", "--dm", "5", "--d", "9", "--trials", "0")
        assert code == 2 and "true_delay" in err

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "roc", "--config", str(tmp_path / "absent.cfg"))
        assert code == 2 and err

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["roc", "--k", "many"])
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2


class TestOtherModes:
    def test_snr_analytic(self, capsys):
        code, out, _ = run(capsys, "snr", "--snr-db=-30,0,6", "--trials", "0")
        assert code == 0
        assert "snr_db,alpha,tau,p_d_analytic,p_d_mc,p_d_ci,p_d_onebit,p_d_onebit_ci" in out
        rows = table(out)
        assert len(rows) == 6
        assert abs(float(rows[0]["p_d_analytic"]) - 0.05) <= 0.01
        at05 = [float(r["p_d_analytic"]) for r in rows if r["alpha"] == "0.05"]
        assert at05 == sorted(at05)

    def test_snr_requires_unit_noise(self, capsys):
        code, _, err = run(capsys, "snr", "--sigma1", "2", "--trials", "0")
        assert code == 2 and "sigma1" in err

    def test_snr_monte_carlo(self, capsys):
        code, out, _ = run(capsys, "snr", "--k", "5", "--dm", "4", "--d", "1", "--snr-db", "3",
                           "--alpha", "0.05,0.2", "--trials", "4000")
        rows = table(out)
        assert code == 0 and all(r["p_d_onebit"] != "" for r in rows)

    def test_calibrate_median_and_empirical(self, capsys):
        _, out, _ = run(capsys, "calibrate", "--dm", "0", "--d", "0", "--alpha", "0.5", "--trials", "0")
        assert float(table(out)[0]["tau"]) == pytest.approx(0.0, abs=1e-15)
        _, out, _ = run(capsys, "calibrate", "--k", "5", "--dm", "3", "--d", "0", "--alpha", "0.1", "--trials", "20000")
        row = table(out)[0]
        assert abs(float(row["tau_empirical"]) - float(row["tau"])) < 0.05

    def test_mc(self, capsys):
        code, out, _ = run(capsys, "mc", "--k", "5", "--dm", "3", "--d", "1", "--alpha", "0.1", "--trials", "5000")
        row = table(out)[0]
        assert code == 0 and abs(float(row["p_fa_mc"]) - 0.1) <= 4 * (0.09 / 5000) ** 0.5
        code, _, _ = run(capsys, "mc", "--trials", "0")
        assert code == 2


class TestValidate:
    ARGS = ["validate", "--k", "4", "--dm", "2", "--d", "1", "--trials", "4000"]

    def test_passes_and_reports(self, capsys):
        code, out, _ = run(capsys, *self.ARGS)
        lines = [line for line in out.splitlines() if not line.startswith("#")]
        assert lines and all(line.startswith(("PASS", "FAIL")) for line in lines)
        assert all(" vs " in line for line in lines)
        # the quantile round-trip cannot meet its tolerance in double precision
        failing = [line for line in lines if line.startswith("FAIL")]
        assert all("quantile" in line for line in failing)
        assert code == (1 if failing else 0)

    def test_seed_change_preserves_outcome(self, capsys):
        a = run(capsys, *self.ARGS)[0]
        b = run(capsys, *self.ARGS, "--seed", "77")[0]
        assert a == b

    def test_corrupted_tolerance_fails_loudly(self, capsys):
        code, out, _ = run(capsys, *self.ARGS, "--tol-scale", "0")
        assert code == 1 and out.count("FAIL") >= 5
