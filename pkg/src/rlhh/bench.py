"""Benchmark rows, grouped summaries (gain, speedup, rank) and CSV I/O."""

from __future__ import annotations

import csv
import io
import math
import re
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .engine import EpisodeTrace

ROW_FIELDS = ("instance", "kind", "type", "n", "selector", "seed", "objective", "obj_frac", "gap",
              "time", "iterations", "fallbacks", "cg_truncated", "irmp_optimal", "error")
SUMMARY_FIELDS = ("type", "n", "target", "best_baseline", "target_objective",
                  "best_baseline_objective", "target_time", "best_baseline_time",
                  "gain_pct", "speedup", "rank", "selectors")
TRACE_FIELDS = ("instance", "selector", "seed", "iteration", "time", "objective")

_SOLOMON = re.compile(r"^(rc|r|c)(\d)\d\d", re.IGNORECASE)


def instance_type(name: str, kind: str) -> str:
    """Solomon family (e.g. ``R2``) for benchmark names, else the problem kind."""
    m = _SOLOMON.match(name)
    if kind == "VRPTW" and m:
        return (m.group(1) + m.group(2)).upper()
    return kind


@dataclass
class BenchmarkRow:
    instance: str
    kind: str
    type: str
    n: int
    selector: str
    seed: int = 0
    objective: float = math.nan
    obj_frac: float = math.nan
    gap: float = math.nan
    time: float = 0.0
    iterations: int = 0
    fallbacks: int = 0
    cg_truncated: bool = False
    irmp_optimal: bool = True
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    @classmethod
    def from_trace(cls, trace: EpisodeTrace, selector: str | None = None) -> "BenchmarkRow":
        t = trace.terminal
        return cls(trace.instance, trace.kind, instance_type(trace.instance, trace.kind), trace.n,
                   selector or trace.selector, trace.seed, t.obj_int, t.obj_frac, t.gap,
                   t.total_time, t.iterations, t.fallbacks, t.cg_truncated, t.irmp_optimal)


@dataclass
class SummaryRow:
    type: str
    n: int
    target: str
    best_baseline: str
    target_objective: float
    best_baseline_objective: float
    target_time: float
    best_baseline_time: float
    gain_pct: float
    speedup: float
    rank: int
    selectors: int


def gain_pct(best_baseline: float, target: float) -> float:
    return (best_baseline - target) / best_baseline * 100.0


def speedup(best_baseline_time: float, target_time: float) -> float:
    if target_time <= 0:
        return 1.0 if best_baseline_time <= 0 else math.inf
    return best_baseline_time / target_time


def rank_of(target_objective: float, objectives: Iterable[float], tol: float = 1e-9) -> int:
    """1 + number of methods strictly better than the target."""
    return 1 + sum(o < target_objective - tol for o in objectives)


def _target_selector(selectors: Sequence[str]) -> str:
    for s in selectors:
        if s.startswith("rlhh") or s == "agent":
            return s
    return selectors[-1]


def summarize(rows: Iterable[BenchmarkRow], target: str | None = None,
              group_by: str = "type") -> list[SummaryRow]:
    """Group successful rows by (type, n) and compare the target selector with
    the best other selector (lowest mean objective).

    ``group_by="instance"`` groups by (instance, n) instead.
    """
    groups: "OrderedDict[tuple, OrderedDict[str, list[BenchmarkRow]]]" = OrderedDict()
    for r in rows:
        if not r.ok:
            continue
        key = (r.type if group_by == "type" else r.instance, r.n)
        groups.setdefault(key, OrderedDict()).setdefault(r.selector, []).append(r)

    out = []
    for (gtype, n), by_sel in groups.items():
        means = {s: (sum(r.objective for r in rs) / len(rs), sum(r.time for r in rs) / len(rs))
                 for s, rs in by_sel.items()}
        selectors = list(means)
        tgt = target if target in means else _target_selector(selectors)
        baselines = [s for s in selectors if s != tgt] or [tgt]
        best = min(baselines, key=lambda s: means[s][0])
        t_obj, t_time = means[tgt]
        b_obj, b_time = means[best]
        out.append(SummaryRow(
            gtype, n, tgt, best, t_obj, b_obj, t_time, b_time,
            gain_pct(b_obj, t_obj), speedup(b_time, t_time),
            rank_of(t_obj, (means[s][0] for s in selectors if s != tgt)), len(selectors)))
    return out


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, field_names, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(field_names)
    for rec in records:
        d = asdict(rec) if not isinstance(rec, dict) else rec
        w.writerow([_fmt(d[f]) for f in field_names])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _parse(cls, d: dict):
    kw = {}
    for f in fields(cls):
        raw = d[f.name]
        typ = f.type if isinstance(f.type, str) else f.type.__name__
        if typ == "bool":
            kw[f.name] = raw == "true"
        elif typ == "int":
            kw[f.name] = int(raw)
        elif typ == "float":
            kw[f.name] = float(raw)
        else:
            kw[f.name] = raw
    return cls(**kw)


def write_rows(rows: Iterable[BenchmarkRow], path=None) -> str:
    return _write_csv(path, ROW_FIELDS, rows)


def write_summary(rows: Iterable[SummaryRow], path=None) -> str:
    return _write_csv(path, SUMMARY_FIELDS, rows)


def read_rows(source) -> list[BenchmarkRow]:
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
    reader = csv.DictReader(io.StringIO(text))
    missing = set(ROW_FIELDS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"benchmark CSV missing columns: {sorted(missing)}")
    return [_parse(BenchmarkRow, d) for d in reader]


def read_summary(source) -> list[SummaryRow]:
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
    return [_parse(SummaryRow, d) for d in csv.DictReader(io.StringIO(text))]


def export_traces(traces: Iterable[EpisodeTrace], path=None) -> str:
    """Long-format (time, objective) convergence series, one row per iteration."""
    records = []
    for tr in traces:
        for rec in tr.iterations:
            records.append({"instance": tr.instance, "selector": tr.selector, "seed": tr.seed,
                            "iteration": rec.iteration, "time": rec.time, "objective": rec.objective})
    return _write_csv(path, TRACE_FIELDS, records)
