"""Lookup records, aggregation into success rate / hops / messages, CSV output."""

from __future__ import annotations

import csv
import os
from collections import defaultdict
from dataclasses import astuple, dataclass
from pathlib import Path
from statistics import fmean, pstdev
from typing import Callable, Iterable, Sequence

RECORD_COLUMNS = (
    "run_id", "protocol", "scenario", "n_nodes", "n_domains", "lookup_id", "kind",
    "source_domain", "target_domain", "success", "hops", "messages", "latency_ms", "attempts",
)
AGGREGATE_COLUMNS = ("protocol", "scenario", "n_nodes", "n_domains", "metric", "mean", "std", "count")
METRICS = ("success_rate", "hops", "messages")
DEFAULT_GROUP = ("protocol", "scenario", "n_nodes", "n_domains")


@dataclass(slots=True)
class LookupRecord:
    run_id: str
    protocol: str
    scenario: str
    n_nodes: int
    n_domains: int
    lookup_id: int
    kind: str
    source_domain: int
    target_domain: int
    success: bool
    hops: int
    messages: int
    latency_ms: float
    attempts: int


@dataclass
class AggregateStats:
    protocol: str
    scenario: str
    n_nodes: int
    n_domains: int
    success_rate: float
    success_std: float
    hops_mean: float
    hops_std: float
    messages_mean: float
    messages_std: float
    count: int
    hops_count: int
    domain: int | None = None

    def metric(self, name: str) -> tuple[float, float, int]:
        if name == "success_rate":
            return self.success_rate, self.success_std, self.count
        if name == "hops":
            return self.hops_mean, self.hops_std, self.hops_count
        if name == "messages":
            return self.messages_mean, self.messages_std, self.count
        raise KeyError(name)


class RecordStore:
    """Append-only per-run record list; one row per terminated lookup."""

    def __init__(self):
        self.records: list[LookupRecord] = []
        self._ids: set[int] = set()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def record(self, rec: LookupRecord) -> None:
        if rec.lookup_id in self._ids:
            raise ValueError(f"duplicate lookup_id {rec.lookup_id}")
        self._ids.add(rec.lookup_id)
        self.records.append(rec)


def aggregate(
    records: Iterable[LookupRecord],
    group_by: Sequence[str] = DEFAULT_GROUP,
    filter: Callable[[LookupRecord], bool] | None = None,
    domain: int | None = None,
) -> list[AggregateStats]:
    """Means and population standard deviations per group.

    Hop statistics use successful lookups only; message statistics use all
    lookups. ``domain`` keeps records whose target lies in that domain.
    Groups come out sorted by key, so record order never matters.
    """
    groups: dict[tuple, list[LookupRecord]] = defaultdict(list)
    for r in records:
        if domain is not None and r.target_domain != domain:
            continue
        if filter is not None and not filter(r):
            continue
        groups[tuple(getattr(r, g) for g in group_by)].append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple(map(str, k))):
        rs = groups[key]
        ok = [r.hops for r in rs if r.success]
        msgs = [r.messages for r in rs]
        labels = {f: getattr(rs[0], f) for f in DEFAULT_GROUP}
        labels.update(zip(group_by, key))
        out.append(AggregateStats(
            protocol=labels["protocol"],
            scenario=labels["scenario"],
            n_nodes=labels["n_nodes"],
            n_domains=labels["n_domains"],
            success_rate=len(ok) / len(rs),
            success_std=pstdev([int(r.success) for r in rs]),
            hops_mean=fmean(ok) if ok else 0.0,
            hops_std=pstdev(ok) if ok else 0.0,
            messages_mean=fmean(msgs),
            messages_std=pstdev(msgs),
            count=len(rs),
            hops_count=len(ok),
            domain=domain,
        ))
    return out


def _open_for_write(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def write_records_csv(records: Iterable[LookupRecord], path) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            row = list(astuple(r))
            row[RECORD_COLUMNS.index("success")] = int(r.success)
            w.writerow(row)


def write_aggregates_csv(stats: Iterable[AggregateStats], path) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for s in stats:
            for m in METRICS:
                mean, std, count = s.metric(m)
                w.writerow([s.protocol, s.scenario, s.n_nodes, s.n_domains, m, repr(mean), repr(std), count])


def write_csv(items, path) -> None:
    """Write records or aggregate stats, picking the schema from the item type."""
    items = list(items)
    if items and isinstance(items[0], AggregateStats):
        write_aggregates_csv(items, path)
    else:
        write_records_csv(items, path)


def read_records_csv(path) -> list[LookupRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(LookupRecord(
                run_id=row["run_id"],
                protocol=row["protocol"],
                scenario=row["scenario"],
                n_nodes=int(row["n_nodes"]),
                n_domains=int(row["n_domains"]),
                lookup_id=int(row["lookup_id"]),
                kind=row["kind"],
                source_domain=int(row["source_domain"]),
                target_domain=int(row["target_domain"]),
                success=row["success"] == "1",
                hops=int(row["hops"]),
                messages=int(row["messages"]),
                latency_ms=float(row["latency_ms"]),
                attempts=int(row["attempts"]),
            ))
    return out


def read_aggregates_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["n_nodes"] = int(r["n_nodes"])
        r["n_domains"] = int(r["n_domains"])
        r["mean"] = float(r["mean"])
        r["std"] = float(r["std"])
        r["count"] = int(r["count"])
    return rows


def emit_plot_data(stats: Iterable[AggregateStats], out_dir) -> list[Path]:
    """One whitespace-delimited table per (metric, n_nodes) for grouped-bar plots.

    Columns: n_domains protocol mean std. Returns the written paths.
    """
    out_dir = Path(out_dir)
    by_size: dict[int, list[AggregateStats]] = defaultdict(list)
    for s in stats:
        by_size[s.n_nodes].append(s)
    written = []
    for n in sorted(by_size):
        rows = sorted(by_size[n], key=lambda s: (s.n_domains, s.protocol, s.scenario))
        for m in METRICS:
            path = out_dir / f"{m}_n{n}.dat"
            with _open_for_write(path) as fh:
                fh.write("# n_domains protocol mean std\n")
                for s in rows:
                    mean, std, _ = s.metric(m)
                    fh.write(f"{s.n_domains} {s.protocol} {mean!r} {std!r}\n")
            written.append(path)
    return written


def success_rate_from_records(records: Iterable[LookupRecord]) -> float:
    rs = list(records)
    return sum(r.success for r in rs) / len(rs) if rs else float("nan")


def default_out_dir() -> str:
    return os.environ.get("PODSIM_OUT", "results")
