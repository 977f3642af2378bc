import json
import time
from pathlib import Path

import pytest

from mdighz import cli

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def small_qcc(tmp_path, l_max=20, l_step=10, eta_d=0.4):
    text = (CONFIG_DIR / "qcc_eta40.cfg").read_text()
    text = text.replace("sweep.L_max = 250", f"sweep.L_max = {l_max}")
    text = text.replace("sweep.L_step = 1", f"sweep.L_step = {l_step}")
    text = text.replace("detector.eta_d = 0.40", f"detector.eta_d = {eta_d}")
    path = tmp_path / "qcc.cfg"
    path.write_text(text)
    return path


class TestQccCommand:
    def test_writes_csv_with_manifest(self, tmp_path):
        cfg = small_qcc(tmp_path)
        out = tmp_path / "curve.csv"
        assert cli.main(["qcc", "--config", str(cfg), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# mdighz")
        assert lines[1].startswith("# manifest_digest=sha256:")
        header = next(l for l in lines if not l.startswith("#"))
        assert header == ("distance_km,rate_two_decoy,rate_infinite_decoy,"
                          "raw_rate,e111_bxu,Y111_zl,diagnostics")
        manifest = json.loads(out.with_suffix(".csv.manifest.json").read_text())
        assert manifest["manifest_digest"] in lines[1]
        assert "created_utc" in manifest

    def test_empty_sweep_header_only(self, tmp_path):
        cfg_text = small_qcc(tmp_path).read_text().replace(
            "sweep.L_min = 0", "sweep.L_min = 30")
        cfg = tmp_path / "empty.cfg"
        cfg.write_text(cfg_text)
        out = tmp_path / "empty.csv"
        assert cli.main(["qcc", "--config", str(cfg), "--out", str(out)]) == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert len(rows) == 1  # header only

    def test_config_error_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("detector.eta_d = 1.5\n")
        out = tmp_path / "x.csv"
        assert cli.main(["qcc", "--config", str(bad), "--out", str(out)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        assert cli.main(["qcc", "--config", str(tmp_path / "nope.cfg"),
                         "--out", str(tmp_path / "x.csv")]) == 2

    def test_byte_identical_reruns_and_workers(self, tmp_path):
        cfg = small_qcc(tmp_path)
        outs = []
        for tag, workers in (("a", "1"), ("b", "1"), ("c", "4")):
            out = tmp_path / f"{tag}.csv"
            assert cli.main(["qcc", "--config", str(cfg), "--out", str(out),
                             "--seed", "7", "--workers", workers]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestQssCommand:
    def test_pps_quick(self, tmp_path):
        text = (CONFIG_DIR / "qss_pps_eta40.cfg").read_text()
        text = text.replace("sweep.L_max = 200", "sweep.L_max = 20")
        text = text.replace("sweep.L_step = 1", "sweep.L_step = 10")
        cfg = tmp_path / "pps.cfg"
        cfg.write_text(text)
        out = tmp_path / "pps.csv"
        assert cli.main(["qss", "--config", str(cfg), "--out", str(out)]) == 0
        header = next(l for l in out.read_text().splitlines()
                      if not l.startswith("#"))
        assert "Q_x_sliced" in header

    def test_method_mismatch_is_usage_error(self, tmp_path):
        cfg = small_qcc(tmp_path)
        out = tmp_path / "x.csv"
        code = cli.main(["qss", "--method", "heralded", "--config", str(cfg),
                         "--out", str(out)])
        assert code == 2

    def test_unknown_method_rejected_by_parser(self, tmp_path):
        cfg = small_qcc(tmp_path)
        with pytest.raises(SystemExit) as err:
            cli.main(["qss", "--method", "telepathy", "--config", str(cfg),
                      "--out", "x.csv"])
        assert err.value.code == 2

    def test_wcs_without_phase_plan_is_config_error(self, tmp_path):
        text = small_qcc(tmp_path).read_text()
        cfg = tmp_path / "nok.cfg"
        cfg.write_text(text)
        out = tmp_path / "x.csv"
        assert cli.main(["qss", "--config", str(cfg), "--out", str(out)]) == 2

    def test_heralded_quick(self, tmp_path):
        text = (CONFIG_DIR / "qss_heralded_eta40.cfg").read_text()
        text = text.replace("sweep.L_max = 200", "sweep.L_max = 10")
        cfg = tmp_path / "her.cfg"
        cfg.write_text(text)
        out = tmp_path / "her.csv"
        assert cli.main(["qss", "--config", str(cfg), "--out", str(out),
                         "--quick"]) == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert len(rows) >= 2


class TestMerminCommand:
    def test_constant_two_column(self, tmp_path):
        text = (CONFIG_DIR / "mermin_eta40.cfg").read_text()
        text = text.replace("sweep.L_max = 180", "sweep.L_max = 20")
        text = text.replace("sweep.L_step = 1", "sweep.L_step = 10")
        cfg = tmp_path / "mermin.cfg"
        cfg.write_text(text)
        out = tmp_path / "mermin.csv"
        assert cli.main(["mermin", "--config", str(cfg), "--out", str(out)]) == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert "local_realism_bound" in lines[0]
        for row in lines[1:]:
            assert row.split(",")[2] == "2.0"

    def test_full_misalignment_zeroes_column(self, tmp_path):
        text = (CONFIG_DIR / "mermin_eta40.cfg").read_text()
        text = text.replace("system.e_d = 0.015", "system.e_d = 0.5")
        text = text.replace("sweep.L_max = 180", "sweep.L_max = 10")
        text = text.replace("sweep.L_step = 1", "sweep.L_step = 10")
        cfg = tmp_path / "m.cfg"
        cfg.write_text(text)
        out = tmp_path / "m.csv"
        assert cli.main(["mermin", "--config", str(cfg), "--out", str(out)]) == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        for row in lines[1:]:
            assert float(row.split(",")[1]) == 0.0


class TestValidateCommand:
    def test_quick_passes_fast(self, capsys):
        start = time.monotonic()
        code = cli.main(["validate", "--config", str(CONFIG_DIR / "validate.cfg"),
                         "--quick", "--seed", "12"])
        elapsed = time.monotonic() - start
        out = capsys.readouterr().out
        assert code == 0
        assert "validation passed" in out
        assert elapsed < 10.0

    def test_fault_injection_fails_validation(self, monkeypatch, capsys):
        monkeypatch.setenv("MDIGHZ_FAULT_INJECT", "zgain-sign")
        code = cli.main(["validate", "--config", str(CONFIG_DIR / "validate.cfg"),
                         "--quick", "--seed", "12"])
        assert code != 0


class TestOptimizeCommand:
    def test_runs_and_reports(self, tmp_path):
        cfg = small_qcc(tmp_path)
        out = tmp_path / "opt.csv"
        code = cli.main(["optimize", "--config", str(cfg), "--out", str(out),
                         "--variant", "qcc", "--at", "50", "--box", "0.3:0.5",
                         "--points", "3", "--rounds", "1"])
        assert code == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "variant,distance_km,best_mu,best_rate"
        variant, dist, mu, rate = rows[1].split(",")
        assert variant == "qcc"
        assert 0.3 <= float(mu) <= 0.5
        assert float(rate) > 0
