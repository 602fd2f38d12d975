"""GPS virtual time.

:class:`VirtualClock` is the piecewise-linear primitive: between changes of
the backlogged weight sum it advances at ``capacity / weight_sum`` and it
freezes while nothing is backlogged.

:class:`GpsVirtualTime` drives that primitive with the exact fluid backlog
set: a flow stays backlogged in the fluid system until virtual time reaches
the finish tag of its most recent packet, so the clock must break its linear
segments at those instants even when no real event happens there.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .errors import TimeRegression
from .model import SimTime, VirtualTime


@dataclass
class VirtualClock:
    capacity: float
    last_real: SimTime = 0.0
    last_virtual: VirtualTime = 0.0
    active_weight_sum: float = 0.0

    def advance(self, now: SimTime) -> VirtualTime:
        if now < self.last_real:
            raise TimeRegression(f"clock at t={self.last_real!r}, asked to advance to t={now!r}")
        if self.active_weight_sum > 0:
            self.last_virtual += self.capacity * (now - self.last_real) / self.active_weight_sum
        self.last_real = now
        return self.last_virtual

    def on_backlog_change(self, now: SimTime, new_weight_sum: float) -> "VirtualClock":
        if new_weight_sum < 0:
            raise ValueError(f"weight sum must be non-negative, got {new_weight_sum!r}")
        self.advance(now)
        self.active_weight_sum = new_weight_sum
        return self

    def time_to_reach(self, target: VirtualTime) -> SimTime:
        """Real time at which V hits ``target`` under the current slope."""
        if self.active_weight_sum == 0:
            return math.inf
        return self.last_real + (target - self.last_virtual) * self.active_weight_sum / self.capacity


class GpsVirtualTime:
    """System virtual time of a fluid GPS server fed by stamped packets.

    Call :meth:`at` with the current real time before stamping a packet and
    :meth:`note_finish` with the packet's finish tag afterwards.

    With ``reset_on_idle`` the clock restarts from zero whenever the fluid
    system drains, and ``epoch`` is bumped so owners of stored finish tags
    can discard them.
    """

    def __init__(self, capacity: float, weights: dict[int, float], reset_on_idle: bool = False):
        self.clock = VirtualClock(capacity)
        self.weights = dict(weights)
        self.reset_on_idle = reset_on_idle
        self.epoch = 0
        self._finish: dict[int, VirtualTime] = {}  # backlogged flows only
        self._heap: list[tuple[VirtualTime, int]] = []

    @property
    def backlogged(self) -> frozenset[int]:
        return frozenset(self._finish)

    def _weight_sum(self) -> float:
        if not self._finish:
            return 0.0
        return math.fsum(self.weights[f] for f in self._finish)

    def at(self, now: SimTime) -> VirtualTime:
        clock = self.clock
        if now < clock.last_real:
            raise TimeRegression(f"clock at t={clock.last_real!r}, asked to advance to t={now!r}")
        heap = self._heap
        finish = self._finish
        while heap:
            tag, flow_id = heap[0]
            if finish.get(flow_id) != tag:
                heapq.heappop(heap)  # superseded by a later tag
                continue
            t_hit = clock.time_to_reach(tag)
            if t_hit > now:
                break
            # Break the segment exactly where V reaches the tag.
            clock.last_real = max(t_hit, clock.last_real)
            clock.last_virtual = tag
            while heap and heap[0][0] <= tag:
                t2, f2 = heapq.heappop(heap)
                if finish.get(f2) == t2:
                    del finish[f2]
            clock.active_weight_sum = self._weight_sum()
            if not finish and self.reset_on_idle:
                clock.last_virtual = 0.0
                self.epoch += 1
        return clock.advance(now)

    def note_finish(self, now: SimTime, flow_id: int, tag: VirtualTime) -> None:
        newly = flow_id not in self._finish
        if tag <= self.clock.last_virtual:
            # Zero-length service in the fluid system; never becomes backlogged.
            return
        self._finish[flow_id] = tag
        heapq.heappush(self._heap, (tag, flow_id))
        if newly:
            self.clock.on_backlog_change(now, self._weight_sum())
