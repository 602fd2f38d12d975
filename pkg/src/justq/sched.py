"""Packet stamping and the FIFO / WFQ / JQ service disciplines."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import FlowMismatch, UnknownFlow
from .model import Packet, Scenario, SimTime, VirtualTime
from .vclock import GpsVirtualTime


class Discipline(Enum):
    FIFO = "fifo"
    WFQ = "wfq"
    JQ = "jq"

    @classmethod
    def parse(cls, text: str) -> "Discipline":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown discipline {text!r} (expected fifo, wfq or jq)") from None


@dataclass(frozen=True, slots=True)
class ChargeInputs:
    """Per-packet congestion charges.

    ``fl_le`` is added to the virtual start time (virtual-time units) and
    ``usr_le`` to the packet length (bytes). Both must be zero outside
    congestion.
    """

    fl_le: float = 0.0
    usr_le: float = 0.0
    congested: bool = False

    def __post_init__(self):
        if self.fl_le < 0 or self.usr_le < 0:
            raise ValueError(f"charges must be non-negative: {self}")
        if not self.congested and (self.fl_le != 0 or self.usr_le != 0):
            raise ValueError(f"charges must be zero outside congestion: {self}")


NO_CHARGE = ChargeInputs()


@dataclass(slots=True)
class StampedPacket:
    packet: Packet
    start: VirtualTime
    finish: VirtualTime
    seq: int = 0
    congested: bool = False


@dataclass(slots=True)
class FlowState:
    flow_id: int
    weight_phi: float
    last_finish: VirtualTime = 0.0
    backlog_packets: deque = field(default_factory=deque)
    backlog_bytes: int = 0


def wfq_stamp(flow: FlowState, pkt: Packet, v_arrival: VirtualTime) -> StampedPacket:
    if pkt.flow_id != flow.flow_id:
        raise FlowMismatch(f"packet {pkt.id} belongs to flow {pkt.flow_id}, not {flow.flow_id}")
    start = max(flow.last_finish, v_arrival)
    finish = start + pkt.length_bytes / flow.weight_phi
    flow.last_finish = finish
    return StampedPacket(pkt, start, finish)


def jq_stamp(flow: FlowState, pkt: Packet, v_arrival: VirtualTime, charges: ChargeInputs) -> StampedPacket:
    if pkt.flow_id != flow.flow_id:
        raise FlowMismatch(f"packet {pkt.id} belongs to flow {pkt.flow_id}, not {flow.flow_id}")
    if not charges.congested:
        return wfq_stamp(flow, pkt, v_arrival)
    start = max(flow.last_finish, v_arrival) + charges.fl_le
    finish = start + (pkt.length_bytes + charges.usr_le) / flow.weight_phi
    flow.last_finish = finish
    return StampedPacket(pkt, start, finish, congested=True)


class Scheduler:
    """Per-flow queues on one output link under a chosen discipline.

    The link itself (who is in service, when it frees up) belongs to the
    engine; this class only stamps, buffers and picks the next packet.
    ``queued`` counts waiting packets, excluding one already handed to the
    link, and is what the buffer limit applies to.
    """

    def __init__(self, scenario: Scenario, discipline: Discipline, reset_on_idle: bool = False):
        self.discipline = discipline
        self.buffer_limit = scenario.link.buffer_limit_packets
        self.flows = {f.flow_id: FlowState(f.flow_id, f.weight_phi) for f in scenario.flows}
        self.vtime = GpsVirtualTime(scenario.link.capacity_bytes_per_sec, scenario.weights, reset_on_idle)
        self.queued = 0
        self._epoch = 0
        self._seq = 0
        self._heads: list[tuple] = []  # one key per backlogged flow

    def _head_key(self, sp: StampedPacket, flow_id: int) -> tuple:
        if self.discipline is Discipline.FIFO:
            return (sp.seq, flow_id)
        return (sp.finish, flow_id)

    def enqueue(self, pkt: Packet, now: SimTime, charges: ChargeInputs = NO_CHARGE) -> Optional[StampedPacket]:
        """Stamp and buffer ``pkt``; return None if drop-tail discards it."""
        flow = self.flows.get(pkt.flow_id)
        if flow is None:
            raise UnknownFlow(pkt.flow_id)
        if self.buffer_limit is not None and self.queued + 1 > self.buffer_limit:
            return None
        v = self.vtime.at(now)
        if self.vtime.epoch != self._epoch:
            self._epoch = self.vtime.epoch
            for fs in self.flows.values():
                fs.last_finish = 0.0
        if self.discipline is Discipline.JQ:
            sp = jq_stamp(flow, pkt, v, charges)
        else:
            sp = wfq_stamp(flow, pkt, v)
            sp.congested = charges.congested
        sp.seq = self._seq
        self._seq += 1
        self.vtime.note_finish(now, flow.flow_id, sp.finish)
        if not flow.backlog_packets:
            heapq.heappush(self._heads, self._head_key(sp, flow.flow_id))
        flow.backlog_packets.append(sp)
        flow.backlog_bytes += pkt.length_bytes
        self.queued += 1
        return sp

    def select_next(self) -> Optional[int]:
        if not self._heads:
            return None
        return self._heads[0][-1]

    def dequeue(self) -> Optional[StampedPacket]:
        """Remove and return the head packet of :meth:`select_next`'s flow."""
        if not self._heads:
            return None
        flow_id = heapq.heappop(self._heads)[-1]
        flow = self.flows[flow_id]
        sp = flow.backlog_packets.popleft()
        flow.backlog_bytes -= sp.packet.length_bytes
        self.queued -= 1
        if flow.backlog_packets:
            heapq.heappush(self._heads, self._head_key(flow.backlog_packets[0], flow_id))
        return sp

    def backlog(self) -> list[StampedPacket]:
        out = [sp for fs in self.flows.values() for sp in fs.backlog_packets]
        out.sort(key=lambda sp: sp.seq)
        return out
