"""Fluid GPS reference server.

Integrates the fluid system exactly between events (an arrival, or the
earliest head-of-line completion under the current rates). It works on
remaining bytes rather than virtual time so it shares no code path with the
packetized schedulers it is used to check.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import FlowDescriptor, LinkConfig, Packet

# A head packet with at most this many bytes left is complete. Guards against
# rounding residue when several flows finish at the same instant.
_RESIDUE_BYTES = 1e-9


@dataclass
class FluidRun:
    departures: dict[int, float]
    # (t0, t1, {flow_id: rate}) pieces with constant service rates
    segments: list[tuple[float, float, dict[int, float]]] = field(default_factory=list)

    def served_bytes(self, t0: float, t1: float) -> dict[int, float]:
        acc: dict[int, list[float]] = {}
        for s0, s1, rates in self.segments:
            lo, hi = max(s0, t0), min(s1, t1)
            if hi <= lo:
                continue
            for fid, r in rates.items():
                acc.setdefault(fid, []).append(r * (hi - lo))
        return {fid: math.fsum(parts) for fid, parts in acc.items()}


def gps_simulate(flows: Iterable[FlowDescriptor], arrivals: Sequence[Packet], link: LinkConfig) -> FluidRun:
    weights = {f.flow_id: f.weight_phi for f in flows}
    cap = link.capacity_bytes_per_sec
    queues: dict[int, deque] = {fid: deque() for fid in weights}
    run = FluidRun(departures={})
    backlogged: list[int] = []  # kept sorted for deterministic iteration
    t = 0.0
    i, n = 0, len(arrivals)

    def admit(now):
        nonlocal i
        while i < n and arrivals[i].arrival <= now:
            p = arrivals[i]
            q = queues[p.flow_id]
            if not q:
                backlogged.append(p.flow_id)
                backlogged.sort()
            q.append([p.id, float(p.length_bytes)])
            i += 1

    while i < n or backlogged:
        if not backlogged:
            t = max(t, arrivals[i].arrival)
            admit(t)
            continue
        wsum = math.fsum(weights[f] for f in backlogged)
        rates = {f: cap * weights[f] / wsum for f in backlogged}
        ttf = {f: queues[f][0][1] / rates[f] for f in backlogged}
        dt_done = min(ttf.values())
        t_arr = arrivals[i].arrival if i < n else math.inf
        completing = t + dt_done <= t_arr
        t_next = t + dt_done if completing else t_arr
        dt = t_next - t
        run.segments.append((t, t_next, rates))
        for f in backlogged:
            head = queues[f][0]
            if completing and ttf[f] == dt_done:
                head[1] = 0.0
            else:
                head[1] -= rates[f] * dt
        t = t_next
        for f in list(backlogged):
            q = queues[f]
            if q[0][1] <= _RESIDUE_BYTES:
                run.departures[q.popleft()[0]] = t
            if not q:
                backlogged.remove(f)
        admit(t)
    return run


def gps_run(flows: Iterable[FlowDescriptor], arrivals: Sequence[Packet], link: LinkConfig) -> dict[int, float]:
    """Fluid GPS departure time of every packet, keyed by packet id."""
    return gps_simulate(flows, arrivals, link).departures


def gps_fair_shares(
    flows: Iterable[FlowDescriptor],
    window: tuple[float, float],
    arrivals: Sequence[Packet],
    link: LinkConfig,
) -> dict[int, float]:
    """Bytes each flow receives from a fluid GPS server during ``window``."""
    flows = list(flows)
    served = gps_simulate(flows, arrivals, link).served_bytes(*window)
    return {f.flow_id: served.get(f.flow_id, 0.0) for f in flows}
