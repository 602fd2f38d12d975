"""Fairness and QoS statistics over schedule traces."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .engine import ScheduleTrace, TraceRecord, fmt
from .errors import AllZero, EmptyClass, ZeroOracleShare
from .model import TosClass

Window = tuple[float, float]


def default_window(trace: ScheduleTrace, warmup_fraction: float = 0.1) -> Window:
    return (warmup_fraction * trace.horizon, trace.horizon)


def _in_window(r: TraceRecord, window: Window) -> bool:
    # half-open (t0, t1]: served bytes are then a cumulative difference
    return r.departure is not None and window[0] < r.departure <= window[1]


def jain_index(values: Sequence[float]) -> float:
    xs = [float(x) for x in values]
    if not xs:
        raise ValueError("jain_index needs at least one value")
    if any(x < 0 for x in xs):
        raise ValueError("jain_index is defined for non-negative values")
    sq = math.fsum(x * x for x in xs)
    if sq == 0:
        raise AllZero("jain_index is undefined when every value is zero")
    return math.fsum(xs) ** 2 / (len(xs) * sq)


@dataclass
class FlowStats:
    flow_id: int
    served_bytes: int
    goodput: float
    mean_delay: float
    p99_delay: float
    jitter: float
    drops: int


def flow_stats(trace: ScheduleTrace, window: Optional[Window] = None) -> list[FlowStats]:
    """Per-flow statistics.

    ``served_bytes`` and ``drops`` cover the whole trace; goodput, delay and
    jitter only count packets departing inside ``window``. Undefined delay
    figures (no packet in the window) are NaN.
    """
    window = window or default_window(trace)
    span = window[1] - window[0]
    by_flow: dict[int, list[TraceRecord]] = {fid: [] for fid in trace.flow_classes}
    for r in trace.records:
        by_flow[r.flow_id].append(r)
    out = []
    for fid in sorted(by_flow):
        recs = by_flow[fid]
        sent = [r for r in recs if r.departure is not None]
        measured = sorted((r for r in sent if _in_window(r, window)), key=lambda r: r.departure)
        delays = [r.departure - r.arrival for r in measured]
        if delays:
            mean = math.fsum(delays) / len(delays)
            p99 = float(np.percentile(delays, 99))
        else:
            mean = p99 = math.nan
        jitter = (math.fsum(abs(b - a) for a, b in zip(delays, delays[1:])) / (len(delays) - 1)
                  if len(delays) > 1 else (0.0 if delays else math.nan))
        got = sum(r.length for r in measured)
        out.append(FlowStats(
            flow_id=fid,
            served_bytes=sum(r.length for r in sent),
            goodput=got / span if span > 0 else math.nan,
            mean_delay=mean,
            p99_delay=p99,
            jitter=jitter,
            drops=sum(1 for r in recs if r.dropped),
        ))
    return out


def served_in_window(trace: ScheduleTrace, window: Window) -> dict[int, int]:
    served = {fid: 0 for fid in trace.flow_classes}
    for r in trace.records:
        if _in_window(r, window):
            served[r.flow_id] += r.length
    return served


def maxmin_deviation(trace: ScheduleTrace, oracle_shares: Mapping[int, float], window: Window) -> dict[int, float]:
    """Relative over/under-service of each flow against the fluid GPS share."""
    served = served_in_window(trace, window)
    out = {}
    for fid, share in oracle_shares.items():
        if share <= 0:
            raise ZeroOracleShare(f"flow {fid} receives no service under GPS in {window}")
        out[fid] = (served.get(fid, 0) - share) / share
    return out


def class_delay(trace: ScheduleTrace, tos_class: TosClass, window: Optional[Window] = None) -> tuple[float, float]:
    """Mean and 99th-percentile arrival-to-departure delay of one class."""
    delays = [
        r.departure - r.arrival
        for r in trace.records
        if r.departure is not None
        and trace.flow_classes[r.flow_id] is tos_class
        and (window is None or _in_window(r, window))
    ]
    if not delays:
        raise EmptyClass(f"no transmitted {tos_class.value} packets")
    return math.fsum(delays) / len(delays), float(np.percentile(delays, 99))


def attacker_share(trace: ScheduleTrace, attacker_user_id: int, window: Window) -> float:
    total = attacker = 0
    for r in trace.records:
        if _in_window(r, window):
            total += r.length
            if r.user_id == attacker_user_id:
                attacker += r.length
    return attacker / total if total else 0.0


STATS_COLUMNS = ["discipline"] + [f.name for f in fields(FlowStats)]


def stats_to_csv(discipline: str, stats: Iterable[FlowStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_COLUMNS)
    for s in stats:
        row = asdict(s)
        w.writerow([discipline] + [fmt(row[c]) for c in STATS_COLUMNS[1:]])
    return buf.getvalue()
