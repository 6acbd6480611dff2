"""CLI contracts: exit codes, artifact layout, byte-level determinism."""

import json

import pytest

from graphfolio.cli import main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def synth_dir(tmp_path):
    out = tmp_path / "fixture"
    assert run_cli("synth", "--stocks", "12", "--days", "300", "--factors", "3",
                   "--seed", "3", "--out", str(out)) == 0
    return out


class TestSynth:
    def test_writes_prices_and_sectors(self, synth_dir):
        header = (synth_dir / "prices.csv").read_text().splitlines()[0]
        assert header.startswith("date,S000,S001")
        sectors = (synth_dir / "sectors.csv").read_text().splitlines()
        assert sectors[0] == "ticker,sector"
        assert len(sectors) == 13

    def test_deterministic_per_seed(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli("synth", "--stocks", "5", "--days", "40", "--seed", "9", "--out", str(a))
        run_cli("synth", "--stocks", "5", "--days", "40", "--seed", "9", "--out", str(b))
        assert (a / "prices.csv").read_bytes() == (b / "prices.csv").read_bytes()


class TestIngest:
    def test_valid_fixture_exit_zero(self, synth_dir, capsys):
        assert run_cli("ingest", "--prices", str(synth_dir / "prices.csv")) == 0
        out = capsys.readouterr().out
        assert "universe: 12 tickers" in out
        assert "dropped: 0" in out

    def test_missing_file_exit_two(self, tmp_path, capsys):
        assert run_cli("ingest", "--prices", str(tmp_path / "nope.csv")) == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_gapped_ticker_reported(self, tmp_path, capsys):
        path = tmp_path / "gap.csv"
        path.write_text(
            "date,A,B,C\n2014-01-06,1,2,3\n2014-01-07,1,,3\n2014-01-08,1,2,3\n"
        )
        assert run_cli("ingest", "--prices", str(path)) == 0
        out = capsys.readouterr().out
        assert "dropped: 1" in out and "B:" in out

    def test_writes_panel_cache(self, synth_dir, tmp_path):
        out = tmp_path / "cache"
        assert run_cli("ingest", "--prices", str(synth_dir / "prices.csv"),
                       "--out", str(out)) == 0
        assert (out / "panel.csv").exists()


class TestGraph:
    def test_writes_edges_and_embedding(self, synth_dir, tmp_path):
        out = tmp_path / "graphout"
        assert run_cli("graph", "--prices", str(synth_dir / "prices.csv"),
                       "--from", "2012-01-01", "--to", "2012-07-01",
                       "--out", str(out)) == 0
        edges = (out / "edges.csv").read_text().splitlines()
        assert edges[0] == "source,target,weight"
        coords = (out / "embedding.csv").read_text().splitlines()
        assert coords[0] == "ticker,x,y"
        assert len(coords) == 13

        # edge count must match an in-process fit on the same window
        from datetime import date
        from graphfolio.graph import edges_from_precision, fit_precision_graph
        from graphfolio.market_data import compute_returns, load_prices, slice_window
        panel, _ = load_prices(synth_dir / "prices.csv")
        window = slice_window(compute_returns(panel),
                              date(2012, 1, 1), date(2012, 7, 1))
        expected = edges_from_precision(fit_precision_graph(window))
        assert len(edges) - 1 == len(expected)

    def test_bad_window_exit_two(self, synth_dir, tmp_path, capsys):
        assert run_cli("graph", "--prices", str(synth_dir / "prices.csv"),
                       "--from", "2030-01-01", "--out", str(tmp_path / "g")) == 2


def write_config(path, prices, out_dir, strategies, **overrides):
    cfg = {
        "prices_csv": str(prices),
        "start": "2013-01-01",
        "end": "2013-07-01",
        "initial_capital": 10000.0,
        "seed": 5,
        "risk_free": {"2013": 0.005},
        "strategies": strategies,
        "out_dir": str(out_dir),
        "params": {"n_select": 4, "n_clusters_kmeans": 4, "per_cluster": 3},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


class TestRun:
    def test_three_strategy_run(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "run1"
        cfg = write_config(tmp_path / "cfg.json", synth_dir / "prices.csv", out,
                           ["vol_max", "vol_min", "benchmark"])
        assert run_cli("run", "--config", str(cfg)) == 0
        report = json.loads((out / "report.json").read_text())
        assert [r["strategy"] for r in report] == ["vol_max", "vol_min", "benchmark"]
        assert (out / "curve_vol_max.csv").exists()
        assert (out / "curve_benchmark.csv").exists()
        assert (out / "portfolio_vol_max.csv").exists()
        assert (out / "comparison.svg").read_text().startswith("<svg")

    def test_rerun_byte_identical(self, synth_dir, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        cfg1 = write_config(tmp_path / "c1.json", synth_dir / "prices.csv", out1,
                            ["vol_max", "kmeans_dynamic"])
        cfg2 = write_config(tmp_path / "c2.json", synth_dir / "prices.csv", out2,
                            ["vol_max", "kmeans_dynamic"])
        assert run_cli("run", "--config", str(cfg1)) == 0
        assert run_cli("run", "--config", str(cfg2)) == 0
        files1 = sorted(p.name for p in out1.iterdir())
        files2 = sorted(p.name for p in out2.iterdir())
        assert files1 == files2
        for name in files1:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_unknown_strategy_exit_two(self, synth_dir, tmp_path, capsys):
        cfg = write_config(tmp_path / "bad.json", synth_dir / "prices.csv",
                           tmp_path / "o", ["momentum"])
        assert run_cli("run", "--config", str(cfg)) == 2
        assert "momentum" in capsys.readouterr().err

    def test_invalid_damping_exit_two(self, synth_dir, tmp_path):
        cfg_path = tmp_path / "damp.json"
        write_config(cfg_path, synth_dir / "prices.csv", tmp_path / "o", ["vol_max"],
                     params={"damping": 0.2})
        assert run_cli("run", "--config", str(cfg_path)) == 2

    def test_malformed_json_exit_two(self, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{not json")
        assert run_cli("run", "--config", str(bad)) == 2

    def test_missing_config_exit_two(self, tmp_path):
        assert run_cli("run", "--config", str(tmp_path / "absent.json")) == 2

    def test_weight_scheme_max_sharpe(self, synth_dir, tmp_path):
        out = tmp_path / "ms"
        cfg = write_config(tmp_path / "ms.json", synth_dir / "prices.csv", out,
                           ["vol_min"], weight_scheme="max_sharpe")
        assert run_cli("run", "--config", str(cfg)) == 0
        weight_files = sorted(out.glob("weights_vol_min_*.csv"))
        assert len(weight_files) == 1
        lines = weight_files[0].read_text().splitlines()
        assert lines[0] == "ticker,weight"
        total = sum(float(line.split(",")[1]) for line in lines[1:])
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_cluster_strategy_exports_assignments(self, synth_dir, tmp_path):
        out = tmp_path / "cl"
        cfg = write_config(tmp_path / "cl.json", synth_dir / "prices.csv", out,
                           ["kmeans_dynamic"])
        assert run_cli("run", "--config", str(cfg)) == 0
        lines = (out / "clusters_kmeans_dynamic.csv").read_text().splitlines()
        assert lines[0] == "quarter,ticker,cluster_id,dist_to_center"
        assert len(lines) > 12  # one row per (quarter, ticker)
