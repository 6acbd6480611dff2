"""Command-line driver: ingest, run, graph, synth.

Exit codes: 0 success, 1 computation error, 2 input/config error. All
output files are written atomically (temp + rename) and every run is
byte-reproducible from (config, seed, input files).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import replace
from datetime import date
from pathlib import Path

from . import __version__
from .backtest import (
    BacktestConfig,
    compute_metrics,
    run_benchmark,
    run_dynamic_clusters,
)
from .charts import render_curves_svg
from .cluster import cluster_export_rows, quarterly_clusters
from .errors import DataError, GraphfolioError, ParameterError
from .graph import edges_from_precision, embed_returns, fit_precision_graph
from .market_data import (
    TradingCalendar,
    compute_returns,
    load_prices,
    load_sectors,
    returns_to_prices,
    slice_window,
    synth_drift_returns,
    synth_returns,
)
from .pipeline import (
    ALL_STRATEGIES,
    CLUSTER_STRATEGIES,
    StrategyParams,
    equal_weight_index,
    run_yearly_strategy,
)

EXIT_OK, EXIT_COMPUTE, EXIT_INPUT = 0, 1, 2


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _parse_date(text: str, what: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise ParameterError(f"{what} must be YYYY-MM-DD, got {text!r}") from None


def _write_prices_csv(panel, path: Path) -> None:
    rows = [
        [d.isoformat()] + [f"{panel.prices[i, t]:.10g}" for i in range(panel.n_stocks)]
        for t, d in enumerate(panel.dates)
    ]
    _atomic_write(path, _csv_text(["date", *panel.tickers], rows))


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    sectors = load_sectors(args.sectors) if args.sectors else None
    panel, dropped = load_prices(args.prices, drop_incomplete=True, sectors=sectors)
    print(f"universe: {panel.n_stocks} tickers")
    print(f"range: {panel.dates[0]} .. {panel.dates[-1]} ({panel.n_days} trading days)")
    print(f"dropped: {len(dropped)}")
    for ticker, reason in sorted(dropped.items()):
        print(f"  {ticker}: {reason}")
    if args.out:
        out = Path(args.out)
        _write_prices_csv(panel, out / "panel.csv")
        print(f"wrote {out / 'panel.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.drift:
        rp = synth_drift_returns(args.stocks, args.days, seed=args.seed)
    else:
        rp = synth_returns(args.stocks, args.days, args.factors, seed=args.seed)
    panel = returns_to_prices(rp)
    out = Path(args.out)
    _write_prices_csv(panel, out / "prices.csv")
    sector_rows = [[t, rp.sectors[t]] for t in rp.tickers]
    _atomic_write(out / "sectors.csv", _csv_text(["ticker", "sector"], sector_rows))
    print(f"wrote {out / 'prices.csv'} ({rp.n_stocks} stocks x {panel.n_days} days)")
    print(f"wrote {out / 'sectors.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------

def cmd_graph(args) -> int:
    panel, _ = load_prices(args.prices, drop_incomplete=True)
    rp = compute_returns(panel)
    if args.from_date or args.to_date:
        lo = _parse_date(args.from_date, "--from") if args.from_date else rp.dates[0]
        hi = _parse_date(args.to_date, "--to") if args.to_date else rp.dates[-1]
        rp = slice_window(rp, lo, hi)
    graph = fit_precision_graph(rp, alpha=args.penalty)
    coords = embed_returns(rp, n_components=2)

    out = Path(args.out)
    edge_rows = [
        [rp.tickers[i], rp.tickers[j], f"{w:.10g}"]
        for i, j, w in edges_from_precision(graph)
    ]
    _atomic_write(out / "edges.csv", _csv_text(["source", "target", "weight"], edge_rows))
    coord_rows = [
        [t, f"{coords[i, 0]:.10g}", f"{coords[i, 1]:.10g}"]
        for i, t in enumerate(rp.tickers)
    ]
    _atomic_write(out / "embedding.csv", _csv_text(["ticker", "x", "y"], coord_rows))
    print(f"window: {rp.dates[0]} .. {rp.dates[-1]}, penalty: {graph.alpha:.6g}")
    print(f"wrote {out / 'edges.csv'} ({len(edge_rows)} edges)")
    print(f"wrote {out / 'embedding.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

_PARAM_FIELDS = set(StrategyParams.__dataclass_fields__) - {"seed"}


def _load_run_config(path: Path, seed_override: int | None, out_override: str | None):
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config is not valid JSON: {exc}") from None

    for key in ("prices_csv", "start", "end", "strategies"):
        if key not in raw:
            raise ParameterError(f"config missing required key {key!r}")
    strategies = list(raw["strategies"])
    unknown = [s for s in strategies if s not in ALL_STRATEGIES]
    if unknown:
        raise ParameterError(
            f"unknown strategies {unknown}; valid: {sorted(ALL_STRATEGIES)}"
        )
    if len(set(strategies)) != len(strategies):
        raise ParameterError("duplicate strategies in config")

    start = _parse_date(str(raw["start"]), "start")
    end = _parse_date(str(raw["end"]), "end")
    seed = int(seed_override if seed_override is not None else raw.get("seed", 0))

    params_raw = dict(raw.get("params", {}))
    bad = set(params_raw) - _PARAM_FIELDS
    if bad:
        raise ParameterError(f"unknown params keys {sorted(bad)}")
    params = StrategyParams(**params_raw, seed=seed)

    # Module preconditions checked up front, before any computation.
    if params.n_select < 1 or params.per_cluster < 1:
        raise ParameterError("n_select and per_cluster must be >= 1")
    if params.vae_epochs < 1 or params.vae_repeats < 1:
        raise ParameterError("vae_epochs and vae_repeats must be >= 1")
    if not 0.5 <= params.damping < 1.0:
        raise ParameterError("damping must lie in [0.5, 1)")
    if params.glasso_alpha is not None and params.glasso_alpha < 0:
        raise ParameterError("glasso_alpha must be non-negative")

    risk_free = {int(k): float(v) for k, v in raw.get("risk_free", {}).items()}
    cfg = BacktestConfig(
        start=start,
        end=end,
        initial_capital=float(raw.get("initial_capital", 10_000.0)),
        rebalance=str(raw.get("rebalance", "monthly")),
        recluster="quarterly",
        weight_scheme=str(raw.get("weight_scheme", "equal")),
        risk_free=risk_free,
    )
    out_dir = Path(out_override or raw.get("out_dir", "out"))
    return raw, cfg, strategies, params, out_dir


def _run_one_strategy(tag, rp, cal, cfg, params, benchmark_rp):
    """Returns (curve, portfolios, weight_rows, cluster_models)."""
    if tag == "benchmark":
        return run_benchmark(benchmark_rp, cfg), (), (), None
    if tag in CLUSTER_STRATEGIES:
        method = "kmeans" if tag.startswith("kmeans") else tag
        mode = "static" if tag == "kmeans_static" else "quarterly"
        models = quarterly_clusters(
            rp, cal, method,
            static=(mode == "static"),
            n_clusters_kmeans=params.n_clusters_kmeans,
            n_clusters_ward=params.n_clusters_ward,
            damping=params.damping,
            preference=params.preference,
            random_state=params.seed,
            glasso_alpha=params.glasso_alpha,
            pca_components=params.pca_components,
        )
        curve = run_dynamic_clusters(
            rp, cal, method, replace(cfg, recluster=mode),
            tag=tag, per_cluster=params.per_cluster, models=models,
        )
        return curve, (), (), models
    result = run_yearly_strategy(rp, cal, tag, cfg, params)
    return result.curve, result.portfolios, result.weight_rows, None


def cmd_run(args) -> int:
    cfg_path = Path(args.config)
    raw, cfg, strategies, params, out_dir = _load_run_config(
        cfg_path, args.seed, args.out
    )
    if args.from_date:
        cfg = replace(cfg, start=_parse_date(args.from_date, "--from"))
    if args.to_date:
        cfg = replace(cfg, end=_parse_date(args.to_date, "--to"))

    sectors = load_sectors(raw["sectors_csv"]) if raw.get("sectors_csv") else None
    panel, dropped = load_prices(raw["prices_csv"], drop_incomplete=True, sectors=sectors)
    rp = compute_returns(panel)
    cal = TradingCalendar.from_dates(rp.dates)
    if dropped:
        print(f"dropped {len(dropped)} incomplete tickers")
    if not any(cfg.start <= d < cfg.end for d in rp.dates):
        raise ParameterError(
            f"simulation range [{cfg.start}, {cfg.end}) has no trading days in "
            f"the data ({rp.dates[0]} .. {rp.dates[-1]})"
        )

    if raw.get("benchmark_csv"):
        bench_panel, _ = load_prices(raw["benchmark_csv"], drop_incomplete=True)
        benchmark_rp = compute_returns(bench_panel)
        if benchmark_rp.n_stocks != 1:
            raise ParameterError("benchmark_csv must hold exactly one ticker")
    else:
        benchmark_rp = equal_weight_index(rp)

    curves, reports = [], []
    for tag in strategies:
        try:
            curve, portfolios, weight_rows, models = _run_one_strategy(
                tag, rp, cal, cfg, params, benchmark_rp
            )
        except GraphfolioError as exc:
            manifest = {"failed_strategy": tag, "error": str(exc),
                        "completed": [c.strategy_tag for c in curves]}
            _atomic_write(out_dir / "failure_manifest.json",
                          json.dumps(manifest, indent=2) + "\n")
            raise

        curve_rows = [[d.isoformat(), f"{v:.10g}"] for d, v in zip(curve.dates, curve.values)]
        _atomic_write(out_dir / f"curve_{tag}.csv", _csv_text(["date", "value"], curve_rows))
        if portfolios:
            port_rows = [
                [spec.as_of.isoformat(), spec.strategy_tag, t]
                for spec in portfolios
                for t in spec.tickers
            ]
            _atomic_write(out_dir / f"portfolio_{tag}.csv",
                          _csv_text(["as_of", "strategy", "ticker"], port_rows))
        for as_of, _, wdict in weight_rows:
            wrows = [[t, f"{w:.10g}"] for t, w in wdict.items()]
            _atomic_write(out_dir / f"weights_{tag}_{as_of.isoformat()}.csv",
                          _csv_text(["ticker", "weight"], wrows))
        if models is not None:
            cluster_rows = [
                [q.isoformat(), t, str(cid), f"{dist:.10g}"]
                for q, t, cid, dist in cluster_export_rows(models)
            ]
            _atomic_write(
                out_dir / f"clusters_{tag}.csv",
                _csv_text(["quarter", "ticker", "cluster_id", "dist_to_center"],
                          cluster_rows),
            )
        curves.append(curve)
        reports.append(compute_metrics(curve, cfg.risk_free).to_json_dict())
        print(f"{tag}: final value {curve.final_value:.2f}")

    _atomic_write(out_dir / "report.json", json.dumps(reports, indent=2) + "\n")
    _atomic_write(out_dir / "comparison.svg",
                  render_curves_svg(curves, title="Strategy comparison"))
    print(f"wrote {out_dir / 'report.json'} ({len(reports)} strategies)")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphfolio",
        description="Portfolio research pipeline: latent models, sparse graphs, "
                    "dynamic clustering, backtests.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate a price CSV and cache the panel")
    p_ingest.add_argument("--prices", required=True)
    p_ingest.add_argument("--sectors")
    p_ingest.add_argument("--out")
    p_ingest.set_defaults(func=cmd_ingest)

    p_synth = sub.add_parser("synth", help="generate a seeded synthetic price fixture")
    p_synth.add_argument("--stocks", type=int, default=50)
    p_synth.add_argument("--days", type=int, default=1260)
    p_synth.add_argument("--factors", type=int, default=3)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--drift", action="store_true",
                         help="rotate the high-return block across regimes")
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_graph = sub.add_parser("graph", help="export glasso edges and 2-D embedding")
    p_graph.add_argument("--prices", required=True)
    p_graph.add_argument("--from", dest="from_date")
    p_graph.add_argument("--to", dest="to_date")
    p_graph.add_argument("--penalty", type=float, default=None,
                         help="glasso L1 penalty (default: 0.5 * mean offdiag |S|)")
    p_graph.add_argument("--out", required=True)
    p_graph.set_defaults(func=cmd_graph)

    p_run = sub.add_parser("run", help="run configured strategies end to end")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--out", default=None, help="override config out_dir")
    p_run.add_argument("--from", dest="from_date")
    p_run.add_argument("--to", dest="to_date")
    p_run.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GraphfolioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
