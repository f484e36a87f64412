"""Sweeps over protocols, TTLs and seeds, and their CSV reports."""

from __future__ import annotations

import csv
import io
import logging
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .clusters import ClusterParams
from .metric import COMBINE_RULES
from .router import (
    SimReport,
    epidemic_protocol,
    generate_workload,
    run_simulation,
    tcd_protocol,
    train_bubblerap,
    train_tcd,
)
from .trace import FORMATS, Trace, parse_trace

log = logging.getLogger(__name__)

PROTOCOLS = ("epidemic", "tcd", "bubblerap")
CONFIG_KEYS = (
    "trace",
    "trace_format",
    "x_seconds",
    "protocols",
    "ttl_seconds",
    "messages",
    "seeds",
    "warmup_fraction",
    "combine_rule",
    "quadrature_n",
    "out_dir",
)
RAW_COLUMNS = ["protocol", "seed", "ttl_s", "generated", "delivered", "delivery_ratio", "overhead", "workload_hash"]
SUMMARY_COLUMNS = [
    "protocol",
    "ttl_s",
    "runs",
    "mean_delivery_ratio",
    "median_delivery_ratio",
    "mean_overhead",
    "median_overhead",
]
LONG_COLUMNS = ["protocol", "ttl_s", "seed", "metric", "value"]
MESSAGE_COLUMNS = ["msg_id", "src", "dst", "t_s", "t_v", "delivered_at", "copies_created"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    trace: Path
    trace_format: str = "csv"
    x_seconds: float = 3600
    protocols: tuple[str, ...] = PROTOCOLS
    ttl_seconds: tuple[int, ...] = (3600,)
    messages: int = 100
    seeds: tuple[int, ...] = (0,)
    warmup_fraction: float = 0.2
    combine_rule: str = "noisy-or"
    quadrature_n: int = 256
    out_dir: Path = Path("out")

    def validate(self) -> None:
        if self.trace_format not in FORMATS:
            raise ConfigError(f"trace_format must be one of {', '.join(FORMATS)}")
        if not self.x_seconds > 0:
            raise ConfigError("x_seconds must be > 0")
        unknown = [p for p in self.protocols if p not in PROTOCOLS]
        if unknown or not self.protocols:
            raise ConfigError(f"protocols must be a non-empty subset of {', '.join(PROTOCOLS)}; got {unknown}")
        if not self.ttl_seconds or any(t <= 0 for t in self.ttl_seconds):
            raise ConfigError("ttl_seconds must be a non-empty list of positive values")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.messages < 1:
            raise ConfigError("messages must be >= 1")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must be in [0, 1)")
        if self.combine_rule not in COMBINE_RULES:
            raise ConfigError(f"combine_rule must be one of {', '.join(COMBINE_RULES)}")
        if self.quadrature_n < 16:
            raise ConfigError("quadrature_n must be >= 16")


def _ints(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in _items(value))


def _items(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


_PARSERS = {
    "trace": Path,
    "trace_format": str,
    "x_seconds": float,
    "protocols": lambda v: tuple(_items(v)),
    "ttl_seconds": _ints,
    "messages": int,
    "seeds": _ints,
    "warmup_fraction": float,
    "combine_rule": str,
    "quadrature_n": int,
    "out_dir": Path,
}


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Flat ``key = value`` config; ``#`` starts a comment, lists are comma-separated.

    Relative paths are resolved against ``base_dir``. The trace file must exist.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r} (known: {', '.join(CONFIG_KEYS)})")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {err}") from None
    if "trace" not in values:
        raise ConfigError("config must set 'trace'")
    values.setdefault("out_dir", Path("out"))
    if base_dir is not None:
        for key in ("trace", "out_dir"):
            if key in values and not values[key].is_absolute():
                values[key] = base_dir / values[key]
    cfg = RunConfig(**values)
    cfg.validate()
    if not cfg.trace.is_file():
        raise FileNotFoundError(f"trace file not found: {cfg.trace}")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def load_trace(path: str | Path, fmt: str = "csv") -> Trace:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"trace file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return parse_trace(fh, fmt)


def warmup_cutoff(trace: Trace, fraction: float) -> int:
    lo, _ = trace.horizon
    return lo + int(fraction * trace.duration)


@dataclass
class SweepResult:
    config: RunConfig
    reports: list[SimReport] = field(default_factory=list)


def sweep(cfg: RunConfig, trace: Trace | None = None) -> SweepResult:
    """Run every (protocol, TTL, seed) cell on a shared per-(seed, TTL) workload."""
    cfg.validate()
    trace = trace if trace is not None else load_trace(cfg.trace, cfg.trace_format)
    if len(trace.nodes) < 2:
        raise ValueError("the trace needs at least two nodes")
    params = ClusterParams(cfg.x_seconds)
    cutoff = warmup_cutoff(trace, cfg.warmup_fraction)
    protocols = {}
    if "tcd" in cfg.protocols:
        ict, durations = train_tcd(trace, cutoff, params)
        protocols["tcd"] = lambda: tcd_protocol(params, ict, durations, cfg.combine_rule, cfg.quadrature_n)
    if "bubblerap" in cfg.protocols:
        bubble = train_bubblerap(trace, cutoff)
        protocols["bubblerap"] = lambda: bubble
    protocols["epidemic"] = epidemic_protocol

    result = SweepResult(cfg)
    end = trace.horizon[1]
    for ttl in cfg.ttl_seconds:
        window = (cutoff, max(cutoff, end - ttl))
        for seed in cfg.seeds:
            workload = generate_workload(trace, cfg.messages, ttl, window, seed)
            for name in cfg.protocols:
                log.info("run protocol=%s ttl=%d seed=%d", name, ttl, seed)
                result.reports.append(run_simulation(trace, protocols[name](), workload, seed, params, ttl))
    return result


# -- reports ---------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def raw_rows(reports: Sequence[SimReport]) -> list[list]:
    return [
        [r.protocol, r.seed, r.ttl, r.generated, r.delivered, _fmt(r.delivery_ratio), r.overhead, r.workload]
        for r in reports
    ]


def summarize(raw: Iterable[dict]) -> list[list]:
    """Mean and median delivery ratio and overhead per (protocol, TTL), from raw rows as dicts."""
    cells = defaultdict(list)
    order = []
    for row in raw:
        key = (row["protocol"], int(row["ttl_s"]))
        if key not in cells:
            order.append(key)
        cells[key].append((float(row["delivery_ratio"]), float(row["overhead"])))
    out = []
    for protocol, ttl in order:
        runs = cells[(protocol, ttl)]
        dr = [r[0] for r in runs]
        oh = [r[1] for r in runs]
        out.append([
            protocol, ttl, len(runs),
            _fmt(statistics.fmean(dr)), _fmt(statistics.median(dr)),
            _fmt(statistics.fmean(oh)), _fmt(statistics.median(oh)),
        ])
    return out


def long_rows(raw: Iterable[dict]) -> list[list]:
    out = []
    for row in raw:
        for metric in ("delivery_ratio", "overhead", "delivered", "generated"):
            out.append([row["protocol"], row["ttl_s"], row["seed"], metric, row[metric]])
    return out


def message_rows(report: SimReport) -> list[list]:
    return [
        [m.id, m.source, m.destination, m.t_s, m.t_v, "" if m.delivered_at is None else m.delivered_at,
         m.copies_created]
        for m in report.messages
    ]


def raw_dicts(reports: Sequence[SimReport]) -> list[dict]:
    """Raw rows keyed by column, as they read back from sweep.csv."""
    return [dict(zip(RAW_COLUMNS, (str(v) for v in row))) for row in raw_rows(reports)]


def write_report_files(raw: list[dict], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "summary.csv", out_dir / "long.csv"]
    paths[0].write_text(_csv(SUMMARY_COLUMNS, summarize(raw)), encoding="utf-8")
    paths[1].write_text(_csv(LONG_COLUMNS, long_rows(raw)), encoding="utf-8")
    return paths


def write_sweep(result: SweepResult, out_dir: Path | None = None) -> list[Path]:
    """Write sweep.csv (one row per run), summary.csv, long.csv and per-message CSVs."""
    out_dir = Path(out_dir or result.config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = raw_rows(result.reports)
    sweep_path = out_dir / "sweep.csv"
    sweep_path.write_text(_csv(RAW_COLUMNS, rows), encoding="utf-8")
    paths = [sweep_path, *write_report_files(raw_dicts(result.reports), out_dir)]
    msg_dir = out_dir / "messages"
    msg_dir.mkdir(exist_ok=True)
    for r in result.reports:
        path = msg_dir / f"{r.protocol}_ttl{r.ttl}_seed{r.seed}.csv"
        path.write_text(_csv(MESSAGE_COLUMNS, message_rows(r)), encoding="utf-8")
        paths.append(path)
    return paths


def read_raw(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"sweep file not found: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RAW_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(RAW_COLUMNS)}")
        return list(reader)
