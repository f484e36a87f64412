"""Command-line entry point.

Subcommands: simulate, clusters, fit-ict, gen-trace, metric, report.
Exit status is 0 on success, 1 on runtime errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .clusters import ClusterParams, ClusterTracker, cluster_stats
from .experiment import (
    _csv,
    load_config,
    load_trace,
    raw_dicts,
    read_raw,
    summarize,
    sweep,
    warmup_cutoff,
    write_report_files,
    write_sweep,
)
from .ict import FAMILIES, fit_ict_table
from .metric import COMBINE_RULES, MetricContext, QuadratureOptions, evaluate
from .router import train_tcd
from .trace import FORMATS, FamilySpec, SyntheticTraceConfig, generate_synthetic_trace, serialize_trace

log = logging.getLogger("crowdcast")

LOG_LEVELS = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}
AIC_COLUMNS = {"exponential": "aic_exp", "pareto": "aic_pareto", "lognormal": "aic_lognormal"}


def _setup_logging() -> None:
    level = os.environ.get("CROWDCAST_LOG", "off").strip().lower()
    if level not in LOG_LEVELS:
        print(f"warning: CROWDCAST_LOG={level!r} not one of off|info|debug; logging off", file=sys.stderr)
        level = "off"
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _num(x: float) -> str:
    return repr(float(x))


# -- subcommands ------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    result = sweep(cfg)
    out_dir = Path(args.out_dir) if args.out_dir else cfg.out_dir
    write_sweep(result, out_dir)
    for row in summarize(raw_dicts(result.reports)):
        print(f"{row[0]:>10} ttl={row[1]:>6} runs={row[2]:>3} delivery={row[4]} overhead={row[6]} (medians)")
    print(f"wrote {out_dir}")
    return 0


def cmd_clusters(args) -> int:
    trace = load_trace(args.trace, args.format)
    stats = cluster_stats(trace, ClusterParams(args.x), args.interval)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "clusters.csv").write_text(
        _csv(["t", "node", "cluster_size", "two_hop_size"], stats.series), encoding="utf-8"
    )
    summary = [
        ("mean_size", f"{stats.mean_size:.6f}"),
        ("max_size", stats.max_size),
        ("mean_two_hop_size", f"{stats.mean_two_hop_size:.6f}"),
    ]
    (out_dir / "clusters_summary.csv").write_text(_csv(["metric", "value"], summary), encoding="utf-8")
    print(f"mean cluster size {stats.mean_size:.3f}, max {stats.max_size}, mean 2-hop {stats.mean_two_hop_size:.3f}")
    return 0


def cmd_fit_ict(args) -> int:
    trace = load_trace(args.trace, args.format)
    if args.warmup_fraction is not None:
        trace = trace.until(warmup_cutoff(trace, args.warmup_fraction))
    table = fit_ict_table(trace, args.min_samples)
    rows = []
    for (a, b), m in sorted(table.models.items()):
        own = m.source == "per-pair"
        aic = [f"{m.aic[f]:.6f}" if own and f in m.aic else "" for f in FAMILIES]
        p2 = _num(m.params[1]) if len(m.params) > 1 else ""
        rows.append([a, b, m.family, _num(m.params[0]), p2, m.sample_count, *aic])
    header = ["node_a", "node_b", "family", "param1", "param2", "sample_count", *(AIC_COLUMNS[f] for f in FAMILIES)]
    _write(_csv(header, rows), args.out)
    return 0


def _family(text: str) -> FamilySpec:
    name, _, shape = text.partition(":")
    return FamilySpec(name, float(shape)) if shape else FamilySpec(name)


def cmd_gen_trace(args) -> int:
    cfg = SyntheticTraceConfig(
        communities=tuple(args.communities),
        intra_rate=args.intra_rate,
        inter_rate=args.inter_rate,
        intra_family=_family(args.intra_family),
        inter_family=_family(args.inter_family),
        contact_duration_mean=args.duration_mean,
        contact_duration_std=args.duration_std,
        horizon=args.horizon,
        membership_switch_period=args.switch_period,
        rate_heterogeneity=args.heterogeneity,
        seed=args.seed,
    )
    trace = generate_synthetic_trace(cfg)
    _write(serialize_trace(trace, args.format), args.out)
    log.info("generated %d contacts among %d nodes", len(trace), len(trace.nodes))
    return 0


def _queries(args) -> list[tuple[str, str, float, float]]:
    if args.queries:
        path = Path(args.queries)
        if not path.is_file():
            raise FileNotFoundError(f"query file not found: {path}")
        with path.open(encoding="utf-8", newline="") as fh:
            return [(r["i"], r["d"], float(r["t_e"]), float(r["t_v"])) for r in csv.DictReader(fh)]
    missing = [f for f in ("i", "d", "t_e", "t_v") if getattr(args, f) is None]
    if missing:
        raise ValueError(f"give --queries or all of --i --d --t-e --t-v (missing: {', '.join(missing)})")
    return [(args.i, args.d, args.t_e, args.t_v)]


def cmd_metric(args) -> int:
    trace = load_trace(args.trace, args.format)
    params = ClusterParams(args.x)
    ict, durations = train_tcd(trace, warmup_cutoff(trace, args.warmup_fraction), params)
    options = QuadratureOptions(args.quadrature_n, args.combine_rule)
    rows = []
    for i, d, t_e, t_v in sorted(_queries(args), key=lambda q: q[2]):
        tracker = ClusterTracker(trace.nodes, params)
        for ev in trace.until(t_e):
            tracker.observe(ev)
        ctx = MetricContext(i, d, t_e, t_v, tracker.view(i, t_e), ict, durations, options=options)
        case, prob = evaluate(ctx)
        rows.append([i, d, _num(t_e), _num(t_v), case, f"{prob:.6f}"])
    _write(_csv(["i", "d", "t_e", "t_v", "case", "probability"], rows), args.out)
    return 0


def cmd_report(args) -> int:
    raw = read_raw(args.sweep)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.sweep).parent
    write_report_files(raw, out_dir)
    print(f"{'protocol':>10} {'ttl_s':>7} {'runs':>4} {'mean_dr':>9} {'median_dr':>9} {'mean_oh':>10} {'median_oh':>10}")
    for row in summarize(raw):
        print(f"{row[0]:>10} {row[1]:>7} {row[2]:>4} {row[3]:>9} {row[4]:>9} {row[5]:>10} {row[6]:>10}")
    return 0


# -- parser -------------------------------------------------------------------------------


def _add_trace_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trace", required=True, help="contact trace file")
    p.add_argument("--format", choices=FORMATS, default="csv", help="trace format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdcast", description="Transient-cluster forwarding for opportunistic networks.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("simulate", help="run a protocol x TTL x seed sweep from a config file")
    p.add_argument("--config", required=True, help="flat key = value run config")
    p.add_argument("--out-dir", help="override the config's out_dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("clusters", help="replay a trace and report transient cluster sizes")
    _add_trace_args(p)
    p.add_argument("--x", type=float, default=3600, help="membership threshold in seconds (default 3600)")
    p.add_argument("--interval", type=int, default=600, help="sampling interval in seconds (default 600)")
    p.add_argument("--out-dir", default=".", help="directory for clusters.csv and clusters_summary.csv")
    p.set_defaults(func=cmd_clusters)

    p = sub.add_parser("fit-ict", help="fit per-pair inter-contact-time laws")
    _add_trace_args(p)
    p.add_argument("--min-samples", type=int, default=5)
    p.add_argument("--warmup-fraction", type=float, help="fit only on this leading fraction of the trace")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_fit_ict)

    p = sub.add_parser("gen-trace", help="generate a synthetic community trace")
    p.add_argument("--communities", type=int, nargs="+", default=[10, 10], help="community sizes")
    p.add_argument("--intra-rate", type=float, default=1 / 3600, help="intra-community contact rate per pair (1/s)")
    p.add_argument("--inter-rate", type=float, default=1 / 86400, help="inter-community contact rate per pair (1/s)")
    p.add_argument("--intra-family", default="exponential", help=f"ICT law: {'|'.join(FAMILIES)}[:shape]")
    p.add_argument("--inter-family", default="exponential", help=f"ICT law: {'|'.join(FAMILIES)}[:shape]")
    p.add_argument("--duration-mean", type=float, default=300.0)
    p.add_argument("--duration-std", type=float, default=100.0)
    p.add_argument("--horizon", type=int, default=3 * 86400, help="seconds")
    p.add_argument("--switch-period", type=int, default=0, help="community rotation period in seconds (0 = static)")
    p.add_argument("--heterogeneity", type=float, default=0.0, help="log-normal sigma of per-pair rate multipliers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("metric", help="evaluate the forwarding metric for (i, d, t_e, t_v) queries")
    _add_trace_args(p)
    p.add_argument("--i")
    p.add_argument("--d")
    p.add_argument("--t-e", type=float)
    p.add_argument("--t-v", type=float)
    p.add_argument("--queries", help="CSV with columns i,d,t_e,t_v")
    p.add_argument("--x", type=float, default=3600)
    p.add_argument("--warmup-fraction", type=float, default=0.2, help="leading trace fraction used to fit models")
    p.add_argument("--combine-rule", choices=COMBINE_RULES, default="noisy-or")
    p.add_argument("--quadrature-n", type=int, default=256)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("report", help="re-aggregate a sweep.csv into summary.csv and long.csv")
    p.add_argument("--sweep", required=True, help="raw sweep CSV written by simulate")
    p.add_argument("--out-dir", help="default: the sweep file's directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging()
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
    return 1
