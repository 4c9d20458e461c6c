import csv
import io
import json

import numpy as np
import pytest

from pricesignal.analysis import find_thresholds
from pricesignal.cli import InvalidInput, RunConfig, main
from pricesignal.market import load_market, validate
from pricesignal.signaling_neg import lower_support_price
from support import DATA, NEG_MARKET, POS_MARKET

GOLDEN = DATA / "golden"


def run(*args):
    return main([str(a) for a in args])


def out_text(tmp_path, *args, expect=0, name="out"):
    path = tmp_path / name
    assert run(*args, "--out", path) == expect
    return path.read_text()


class TestGolden:
    @pytest.mark.parametrize("args, golden", [
        (("solve", "--market", NEG_MARKET), "solve_neg.json"),
        (("solve", "--market", POS_MARKET), "solve_pos.json"),
        (("compare", "--market", NEG_MARKET), "compare_neg.csv"),
        (("compare", "--market", POS_MARKET), "compare_pos.csv"),
        (("sweep", "--market", NEG_MARKET, "mu0", 0.05, 0.95, 19), "sweep_neg_mu0.csv"),
        (("verify", "--market", NEG_MARKET, "--grid-n", 1024), "verify_neg.json"),
        (("simulate", "--market", NEG_MARKET, "--rounds", 2000, "--consumers", 100, "--seed", 5),
         "simulate_neg.json"),
    ])
    def test_byte_identical(self, tmp_path, args, golden):
        assert out_text(tmp_path, *args) == (GOLDEN / golden).read_text()

    def test_repeat_runs_identical(self, tmp_path):
        args = ("simulate", "--market", POS_MARKET, "--rounds", 500, "--consumers", 50, "--seed", 9)
        assert out_text(tmp_path, *args, name="a") == out_text(tmp_path, *args, name="b")


class TestSolve:
    def test_negative_profile(self, tmp_path):
        doc = json.loads(out_text(tmp_path, "solve", "--market", NEG_MARKET))
        assert doc["schema"] == "profile.v1" and doc["label"] == "theorem"
        m = validate(load_market(NEG_MARKET))
        assert doc["meta"]["pGLow"] == pytest.approx(lower_support_price(m), abs=1e-12)
        assert doc["meta"]["pB"] == 0.2
        assert set(doc["meta"]["benchmarks"]) == {"GG", "GB", "BG", "BB"}
        assert doc["meta"]["benchmarks"]["GB"]["tradePrice"] == pytest.approx(0.3)

    def test_positive_profile(self, tmp_path):
        doc = json.loads(out_text(tmp_path, "solve", "--market", POS_MARKET))
        assert doc["label"] == "symmetric-pooling"
        atoms = {s["atoms"][0][0] for firm in doc["strategies"].values() for s in firm.values()}
        assert atoms == {0.3}

    def test_benchmark_when_pooling_fails(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text(POS_MARKET.read_text().replace("mu0 = 0.8", "mu0 = 0.5"))
        doc = json.loads(out_text(tmp_path, "solve", "--market", path))
        assert doc["schema"] == "benchmark.v1"
        assert doc["benchmarks"]["GB"]["tradePrice"] == pytest.approx(0.4)


class TestVerify:
    def test_canonical_passes(self, tmp_path):
        for market in (NEG_MARKET, POS_MARKET):
            doc = json.loads(out_text(tmp_path, "verify", "--market", market, "--grid-n", 1024))
            assert doc["schema"] == "report.v1" and doc["pass"]
            assert doc["icVerdict"]["status"] == "survives"

    def test_tampered_profile_fails_with_witness(self, tmp_path):
        prof = json.loads(out_text(tmp_path, "solve", "--market", NEG_MARKET, name="p.json"))
        for firm in prof["strategies"].values():
            firm["B"]["atoms"] = [[0.25, 1.0]]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(prof))
        doc = json.loads(out_text(tmp_path, "verify", "--market", NEG_MARKET, "--profile", bad, expect=1))
        assert not doc["pass"]
        assert doc["maxDeviationGain"]["XB"] > doc["eps"]
        assert 0.25 - 1e-6 < doc["witness"]["XB"] < 0.25

    def test_profile_file_round_trip(self, tmp_path):
        prof = tmp_path / "p.json"
        run("solve", "--market", POS_MARKET, "--out", prof)
        doc = json.loads(out_text(tmp_path, "verify", "--market", POS_MARKET, "--profile", prof))
        assert doc["pass"] and doc["label"] == "symmetric-pooling"


class TestIc:
    def test_negative_survives(self, tmp_path):
        doc = json.loads(out_text(tmp_path, "ic", "--market", NEG_MARKET, "--grid-n", 1024))
        assert doc == {"schema": "ic.v1", "label": "theorem", "equilibrium": True,
                       "verdict": {"status": "survives", "witnessPrice": None, "deviatingType": None,
                                   "firm": None}}

    def test_increasing_premium_pool_eliminated(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("mu0 = 0.8\nc_g = 0.3\nc_b = 0.1\nnu0 = 0.25\nnu1 = 0.2\ndist_kind = uniform\n"
                        "v_bar = 1\nregime = positive\n")
        prof = tmp_path / "p.json"
        assert run("solve", "--market", path, "--out", prof) == 0
        doc = json.loads(out_text(tmp_path, "ic", "--market", path, "--profile", prof))
        assert doc["equilibrium"] and doc["verdict"]["status"] == "eliminated"
        assert doc["verdict"]["deviatingType"] == "G"


class TestCompareAndSweep:
    def test_compare_rows(self, tmp_path):
        rows = list(csv.DictReader(io.StringIO(out_text(tmp_path, "compare", "--market", POS_MARKET))))
        assert [r["mode"] for r in rows] == ["public", "private"]
        assert float(rows[0]["expected_price"]) == pytest.approx(0.324)
        assert float(rows[1]["expected_price"]) == pytest.approx(0.3)

    def test_sweep_signs_match_thresholds(self, tmp_path):
        text = out_text(tmp_path, "sweep", "--market", NEG_MARKET, "mu0", 0.05, 0.95, 19)
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 19
        assert text.splitlines()[0] == "param,value,public_price,private_price,delta,public_dispersion," \
                                       "private_dispersion"
        deltas = np.array([float(r["delta"]) for r in rows])
        th = find_thresholds(validate(load_market(NEG_MARKET)), n=64)
        assert th.no_interval
        assert np.all(np.sign(deltas) == np.sign(th.gaps[0]))

    def test_sweep_positive_pooling_range(self, tmp_path):
        rows = list(csv.DictReader(io.StringIO(
            out_text(tmp_path, "sweep", "--market", POS_MARKET, "mu0", 0.7, 0.9, 3))))
        assert [float(r["private_price"]) for r in rows] == pytest.approx([0.3, 0.3, 0.3])

    def test_sweep_positive_without_pool_is_invalid(self, tmp_path, capsys):
        assert run("sweep", "--market", POS_MARKET, "mu0", 0.1, 0.9, 3) == 2
        assert "not an equilibrium" in capsys.readouterr().err


class TestSimulate:
    def test_record_and_histogram(self, tmp_path):
        hist = tmp_path / "h.csv"
        doc = json.loads(out_text(tmp_path, "simulate", "--market", NEG_MARKET, "--rounds", 3000,
                                  "--consumers", 100, "--hist", hist))
        assert doc["label"] == "theorem" and doc["rounds"] == 3000
        mean, se = doc["profit"]["XG"]
        assert abs(mean - 0.09) < 3 * se
        lines = hist.read_text().splitlines()
        assert lines[0] == "price_bin,mass" and len(lines) == 51


class TestInvalidInput:
    def test_bad_prior(self, tmp_path, capsys):
        path = tmp_path / "m.txt"
        path.write_text(NEG_MARKET.read_text().replace("mu0 = 0.5", "mu0 = 1.5"))
        assert run("solve", "--market", path) == 2
        assert "InvalidPrior" in capsys.readouterr().err

    def test_missing_market_file(self, tmp_path, capsys):
        assert run("solve", "--market", tmp_path / "none.txt") == 2
        assert "error:" in capsys.readouterr().err

    @pytest.mark.parametrize("args", [
        ("solve", "--market", NEG_MARKET, "--grid-n", 10),
        ("solve", "--market", NEG_MARKET, "--eps", 0),
        ("sweep", "--market", NEG_MARKET, "cost", 0, 1, 3),
        ("sweep", "--market", NEG_MARKET, "mu0", 0.1, 0.9, 0),
        ("simulate", "--market", NEG_MARKET, "--rounds", 0),
    ])
    def test_config_invariants(self, args, capsys):
        assert run(*args) == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_malformed_profile(self, tmp_path, capsys):
        bad = tmp_path / "p.json"
        bad.write_text("{}")
        assert run("verify", "--market", NEG_MARKET, "--profile", bad) == 2

    def test_run_config_direct(self):
        with pytest.raises(InvalidInput, match="grid-n"):
            RunConfig(market=NEG_MARKET, command="solve", grid_n=65537)

    def test_help(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["--help"])
        assert e.value.code == 0
        text = capsys.readouterr().out
        for cmd in ("solve", "verify", "ic", "compare", "sweep", "simulate", "PSL_LOG"):
            assert cmd in text

    def test_subcommand_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit):
            main(["simulate", "--help"])
        text = capsys.readouterr().out
        for flag in ("--market", "--grid-n", "--eps", "--seed", "--out", "--rounds", "--consumers"):
            assert flag in text


class TestLogging:
    def test_log_level_from_environment(self, tmp_path, monkeypatch, capsys):
        path = tmp_path / "m.txt"
        path.write_text(POS_MARKET.read_text().replace("mu0 = 0.8", "mu0 = 0.5"))
        monkeypatch.setenv("PSL_LOG", "INFO")
        import logging
        logging.getLogger().handlers.clear()
        assert run("solve", "--market", path, "--out", tmp_path / "o") == 0
        assert "no pooling profile" in capsys.readouterr().err
