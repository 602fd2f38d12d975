"""Discrete-event simulation of one output link.

Events at equal times are handled arrivals first, then the transmission
completion, and only then is the link (if free) handed its next packet, so
a packet arriving exactly when the link frees up competes for it.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import io
import math
from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
from typing import Iterable, Optional, Sequence

from .model import Packet, Scenario, SimTime, TosClass, check_packet
from .policy import Policy, PolicyConfig
from .sched import Discipline, Scheduler
from .traffic import GeneratorSpec, generate_all


class EventKind(IntEnum):
    # value doubles as the priority at equal times
    ARRIVAL = 0
    TRANSMISSION_COMPLETE = 1


@dataclass(order=True, slots=True)
class Event:
    time: SimTime
    kind: EventKind
    sequence: int
    payload: object = field(compare=False, default=None)


@dataclass(slots=True)
class TraceRecord:
    packet_id: int
    flow_id: int
    user_id: int
    length: int
    arrival: float
    stamp_start: Optional[float] = None
    stamp_finish: Optional[float] = None
    dequeue: Optional[float] = None
    departure: Optional[float] = None
    dropped: bool = False
    congested_at_arrival: bool = False

    @property
    def transmitted(self) -> bool:
        return self.departure is not None


TRACE_COLUMNS = [f.name for f in fields(TraceRecord)]


@dataclass
class ScheduleTrace:
    discipline: Discipline
    capacity: float
    horizon: SimTime
    flow_classes: dict[int, TosClass]
    records: list[TraceRecord]
    arrivals: int = 0

    def transmitted(self) -> list[TraceRecord]:
        return [r for r in self.records if r.departure is not None]

    def dropped(self) -> list[TraceRecord]:
        return [r for r in self.records if r.dropped]

    def backlog(self) -> list[TraceRecord]:
        return [r for r in self.records if not r.dropped and r.departure is None]


@dataclass(frozen=True)
class Experiment:
    """Everything needed to reproduce a run except the discipline."""

    scenario: Scenario
    generators: tuple[GeneratorSpec, ...]
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    horizon: SimTime = 10.0
    seed: int = 1


def derive_seed(run_seed: int, index: int, spec_seed: int) -> int:
    digest = hashlib.sha256(f"{run_seed}/{index}/{spec_seed}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def make_arrivals(exp: Experiment, horizon: Optional[SimTime] = None) -> list[Packet]:
    horizon = exp.horizon if horizon is None else horizon
    specs = [replace(g, seed=derive_seed(exp.seed, i, g.seed)) for i, g in enumerate(exp.generators)]
    return generate_all(specs, horizon)


def simulate(
    scenario: Scenario,
    arrivals: Sequence[Packet],
    discipline: Discipline,
    horizon: SimTime,
    policy: Optional[PolicyConfig] = None,
    reset_on_idle: bool = False,
) -> ScheduleTrace:
    """Run one discipline over a fixed, time-sorted arrival sequence."""
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    cap = scenario.link.capacity_bytes_per_sec
    sched = Scheduler(scenario, discipline, reset_on_idle)
    pol = Policy(policy or PolicyConfig(), cap)
    charge = discipline is Discipline.JQ
    flow_classes = {f.flow_id: f.tos_class for f in scenario.flows}

    records: list[TraceRecord] = []
    pending: dict[int, TraceRecord] = {}
    events: list[Event] = []
    seq = 0
    n = len(arrivals)
    next_arrival = 0
    in_service = None
    last_time = -math.inf

    def push_arrival():
        nonlocal next_arrival, seq
        if next_arrival < n:
            p = arrivals[next_arrival]
            next_arrival += 1
            heapq.heappush(events, Event(p.arrival, EventKind.ARRIVAL, seq, p))
            seq += 1

    push_arrival()
    while events and events[0].time <= horizon:
        now = events[0].time
        while events and events[0].time == now:
            ev = heapq.heappop(events)
            if ev.kind is EventKind.ARRIVAL:
                pkt = ev.payload
                if pkt.arrival < last_time:
                    raise ValueError("arrivals must be sorted by time")
                last_time = pkt.arrival
                check_packet(pkt)
                charges = pol.on_arrival(pkt, now, sched.queued, charge)
                rec = TraceRecord(pkt.id, pkt.flow_id, pkt.user_id, pkt.length_bytes, pkt.arrival,
                                  congested_at_arrival=charges.congested)
                sp = sched.enqueue(pkt, now, charges)
                if sp is None:
                    rec.dropped = True
                    records.append(rec)
                else:
                    rec.stamp_start = sp.start
                    rec.stamp_finish = sp.finish
                    pending[pkt.id] = rec
                push_arrival()
            else:
                rec = pending.pop(ev.payload)
                rec.departure = now
                records.append(rec)
                in_service = None
        if in_service is None:
            sp = sched.dequeue()
            if sp is not None:
                rec = pending[sp.packet.id]
                rec.dequeue = now
                in_service = rec
                heapq.heappush(events, Event(now + sp.packet.length_bytes / cap,
                                             EventKind.TRANSMISSION_COMPLETE, seq, sp.packet.id))
                seq += 1

    # Packets still waiting or in service at the horizon stay as backlog.
    records.extend(sorted(pending.values(), key=lambda r: r.packet_id))
    return ScheduleTrace(discipline, cap, horizon, flow_classes, records,
                         arrivals=sum(1 for p in arrivals if p.arrival <= horizon))


def run(exp: Experiment, discipline: Discipline, horizon: Optional[SimTime] = None) -> ScheduleTrace:
    horizon = exp.horizon if horizon is None else horizon
    return simulate(exp.scenario, make_arrivals(exp, horizon), discipline, horizon, exp.policy)


def run_comparison(
    exp: Experiment, disciplines: Iterable[Discipline], horizon: Optional[SimTime] = None
) -> dict[Discipline, ScheduleTrace]:
    """Run several disciplines on one shared arrival sequence."""
    horizon = exp.horizon if horizon is None else horizon
    arrivals = make_arrivals(exp, horizon)
    return {d: simulate(exp.scenario, arrivals, d, horizon, exp.policy) for d in disciplines}


def fmt(value) -> str:
    """Locale-independent CSV cell: shortest round-trip floats, lowercase bools."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def trace_to_csv(trace: ScheduleTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace.records:
        w.writerow([fmt(getattr(r, c)) for c in TRACE_COLUMNS])
    return buf.getvalue()


def check_conservation(trace: ScheduleTrace) -> None:
    """Assert arrivals = departures + drops + backlog, and causality."""
    sent, dropped, left = trace.transmitted(), trace.dropped(), trace.backlog()
    if trace.arrivals != len(sent) + len(dropped) + len(left):
        raise AssertionError(
            f"{trace.arrivals} arrivals != {len(sent)} sent + {len(dropped)} dropped + {len(left)} backlog"
        )
    for r in sent:
        if not (r.arrival <= r.dequeue <= r.departure):
            raise AssertionError(f"packet {r.packet_id} violates causality")
        if r.departure != r.dequeue + r.length / trace.capacity:
            raise AssertionError(f"packet {r.packet_id} departure != dequeue + L/C")


def check_work_conservation(trace: ScheduleTrace) -> None:
    """Assert the link never idles while an accepted packet is waiting."""
    accepted = [r for r in trace.records if not r.dropped]
    served = sorted((r for r in accepted if r.dequeue is not None), key=lambda r: r.dequeue)
    waiting = sorted(accepted, key=lambda r: r.arrival)
    # Walk the busy periods: each service must start at the later of the
    # previous departure and the earliest arrival not yet served.
    free_at = -math.inf
    done = set()
    j = 0
    for r in served:
        while j < len(waiting) and waiting[j].packet_id in done:
            j += 1
        earliest = waiting[j].arrival
        expected = max(free_at, earliest)
        if r.dequeue != expected:
            raise AssertionError(f"link idle before packet {r.packet_id}: started {r.dequeue!r}, could start {expected!r}")
        done.add(r.packet_id)
        free_at = r.departure if r.departure is not None else math.inf
    while j < len(waiting) and waiting[j].packet_id in done:
        j += 1
    if j < len(waiting) and max(free_at, waiting[j].arrival) <= trace.horizon and free_at <= trace.horizon:
        raise AssertionError(f"packet {waiting[j].packet_id} left waiting on an idle link")
