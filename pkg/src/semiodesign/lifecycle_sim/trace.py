"""Simulation traces: records, JSON Lines and CSV I/O, trend and variability statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from ..errors import TraceError
from ..morphism import epsilon
from ..semiosis import synchronic_variety
from .agents import preprocess_filter

SUCCESSFUL = "SUCCESSFUL"
NOT_SUCCESSFUL = "NOT_SUCCESSFUL"
SUMMARY_COLUMNS = ("product", "slope", "verdict", "final_epsilon", "synchronic_variety")
DEFAULT_TREND_WINDOW = 16


class InteractionEvent(NamedTuple):
    t: int
    product: str
    kind: str
    mag: float


class ViolationRecord(NamedTuple):
    t: int
    product: str
    expectation: str
    observed: float


class ClusterSnapshot(NamedTuple):
    t: int
    assignments: dict


@dataclass
class SimTrace:
    seed: int
    horizon: int
    events: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    cluster_history: list = field(default_factory=list)
    epsilon_series: dict = field(default_factory=dict)
    final_configs: dict = field(default_factory=dict)
    product_ids: tuple = ()

    @property
    def products(self) -> list[str]:
        ids = set(self.product_ids)
        ids.update(e.product for e in self.events)
        ids.update(v.product for v in self.violations)
        for snap in self.cluster_history:
            ids.update(snap.assignments)
        return sorted(ids)

    def counts(self, product: str, kind: str | None = None) -> list[int]:
        """Per-tick event counts for ``product`` (optionally one event kind)."""
        if kind is None:
            return list(self.count_table().get(product, [0] * self.horizon))
        out = [0] * self.horizon
        for e in self.events:
            if e.product == product and e.kind == kind:
                out[e.t] += 1
        return out

    def count_table(self) -> dict[str, list[int]]:
        """Per-tick event counts for every product, computed in one pass."""
        table = {p: [0] * self.horizon for p in self.products}
        for e in self.events:
            table[e.product][e.t] += 1
        return table

    def kinds(self) -> list[str]:
        return sorted({e.kind for e in self.events})

    def records(self) -> list[dict]:
        rows = []
        for e in self.events:
            rows.append((e.t, 0, {"t": e.t, "rec": "event", "product": e.product,
                                  "kind": e.kind, "mag": e.mag}))
        for v in self.violations:
            rows.append((v.t, 1, {"t": v.t, "rec": "violation", "product": v.product,
                                  "expectation": v.expectation, "observed": v.observed}))
        for c in self.cluster_history:
            rows.append((c.t, 2, {"t": c.t, "rec": "cluster",
                                  "assignments": dict(sorted(c.assignments.items()))}))
        rows.sort(key=lambda r: (r[0], r[1]))  # stable: keeps emission order within a tick
        return [r[2] for r in rows]


def dumps_jsonl(trace: SimTrace) -> str:
    return "".join(json.dumps(r, allow_nan=False) + "\n" for r in trace.records())


def write_jsonl(trace: SimTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_jsonl(trace))


def _need(rec: dict, key: str, types, lineno: int):
    value = rec.get(key)
    if not isinstance(value, types) or isinstance(value, bool):
        raise TraceError("MALFORMED_TRACE", f"line {lineno}: field {key!r} missing or mistyped")
    return value


def loads_jsonl(text: str) -> SimTrace:
    trace = SimTrace(seed=0, horizon=0)
    last_t = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except ValueError as e:
            raise TraceError("MALFORMED_TRACE", f"line {lineno}: {e}") from None
        if not isinstance(rec, dict):
            raise TraceError("MALFORMED_TRACE", f"line {lineno}: expected an object")
        t = _need(rec, "t", int, lineno)
        if t < 0 or t < last_t:
            raise TraceError("MALFORMED_TRACE", f"line {lineno}: tick {t} out of order")
        last_t = t
        kind = rec.get("rec")
        if kind == "event":
            trace.events.append(InteractionEvent(t, _need(rec, "product", str, lineno),
                                                 _need(rec, "kind", str, lineno),
                                                 float(_need(rec, "mag", (int, float), lineno))))
        elif kind == "violation":
            trace.violations.append(ViolationRecord(
                t, _need(rec, "product", str, lineno), _need(rec, "expectation", str, lineno),
                float(_need(rec, "observed", (int, float), lineno))))
        elif kind == "cluster":
            assignments = _need(rec, "assignments", dict, lineno)
            if not all(isinstance(k, str) and isinstance(v, int) and not isinstance(v, bool)
                       for k, v in assignments.items()):
                raise TraceError("MALFORMED_TRACE", f"line {lineno}: bad cluster assignments")
            trace.cluster_history.append(ClusterSnapshot(t, assignments))
        else:
            raise TraceError("MALFORMED_TRACE", f"line {lineno}: unknown record type {kind!r}")
        trace.horizon = max(trace.horizon, t + 1)
    return trace


def read_jsonl(path) -> SimTrace:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as e:
        raise TraceError("IO_ERROR", f"cannot read trace {path}: {e}") from None
    return loads_jsonl(text)


# -- statistics -------------------------------------------------------------------


class Trend(NamedTuple):
    slope: float
    verdict: str


def ols_slope(series: Sequence[float]) -> float:
    """Least-squares slope of ``series`` against 0, 1, 2, ...

    Values are taken relative to the first point so a constant series gives
    exactly zero.
    """
    n = len(series)
    if n < 2:
        raise TraceError("INSUFFICIENT_DATA", f"need at least 2 points, got {n}")
    base = series[0]
    ys = [y - base for y in series]
    x_mean = (n - 1) / 2
    y_mean = math.fsum(ys) / n
    sxy = math.fsum((i - x_mean) * (y - y_mean) for i, y in enumerate(ys))
    sxx = math.fsum((i - x_mean) ** 2 for i in range(n))
    return sxy / sxx


def series_trend(series: Sequence[float], window: int = DEFAULT_TREND_WINDOW) -> Trend:
    if len(series) < 2:
        raise TraceError("INSUFFICIENT_DATA", f"need at least 2 points, got {len(series)}")
    slope = ols_slope(preprocess_filter(series, window))
    return Trend(slope, SUCCESSFUL if slope < 0 else NOT_SUCCESSFUL)


def interaction_trend(trace: SimTrace, product: str, window: int = DEFAULT_TREND_WINDOW) -> Trend:
    """OLS slope of the filtered per-tick event count; decreasing means successful."""
    if product not in trace.products:
        raise TraceError("UNKNOWN_PRODUCT", f"product {product!r} does not occur in the trace")
    return series_trend(trace.counts(product), window)


def coefficient_of_variation(series: Sequence[float]) -> float:
    n = len(series)
    if n == 0:
        return 0.0
    mean = math.fsum(series) / n
    if mean == 0:
        return 0.0
    var = math.fsum((x - mean) ** 2 for x in series) / n
    return math.sqrt(var) / mean


def _sum_series(series: Iterable[Sequence[int]], horizon: int) -> list[int]:
    out = [0] * horizon
    for s in series:
        for i, x in enumerate(s):
            out[i] += x
    return out


class BufferingReport(NamedTuple):
    product_cv: float
    cluster_cv: float
    family_cv: float

    @property
    def buffered(self) -> bool:
        return self.family_cv <= self.cluster_cv <= self.product_cv


def buffering_report(trace: SimTrace, clustering, families: dict) -> BufferingReport:
    """Mean coefficient of variation of event rates at the three grouping levels."""
    table = trace.count_table()
    per_product = {p: table.get(p, [0] * trace.horizon) for p in clustering.assignments}
    per_cluster = {cid: _sum_series((per_product[p] for p in clustering.members(cid)), trace.horizon)
                   for cid in range(clustering.count)}
    per_family = [_sum_series((per_cluster[c] for c in cids), trace.horizon)
                  for cids in families.values()]

    def mean_cv(group):
        group = list(group)
        return math.fsum(coefficient_of_variation(s) for s in group) / len(group) if group else 0.0

    return BufferingReport(mean_cv(per_product.values()), mean_cv(per_cluster.values()),
                           mean_cv(per_family))


def summary_rows(trace: SimTrace, window: int = DEFAULT_TREND_WINDOW) -> list[dict]:
    rows = []
    for pid in trace.products:
        if trace.horizon >= 2:
            slope, verdict = series_trend(trace.counts(pid), window)
        else:
            slope, verdict = 0.0, NOT_SUCCESSFUL
        cfg = trace.final_configs.get(pid)
        rows.append({
            "product": pid,
            "slope": repr(slope),
            "verdict": verdict,
            "final_epsilon": epsilon(cfg) if cfg is not None else "",
            "synchronic_variety": synchronic_variety(cfg) if cfg is not None else "",
        })
    return rows


def dumps_summary(trace: SimTrace, window: int = DEFAULT_TREND_WINDOW) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(summary_rows(trace, window))
    return buf.getvalue()


def write_summary(trace: SimTrace, path, window: int = DEFAULT_TREND_WINDOW) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_summary(trace, window))
