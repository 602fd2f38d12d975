"""Seeded open-loop workload generators.

Random draws come from Python's ``random.Random`` (MT19937), whose
``random()`` stream is identical on every platform for a given integer
seed. Exponential variates are drawn by inversion so no library-specific
sampling routine is involved.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

from .errors import InvalidSpec
from .model import Packet, SimTime, TosClass

RNG_ALGORITHM = "MT19937 (python random.Random, inversion sampling)"


class GenKind(Enum):
    CBR = "cbr"
    POISSON = "poisson"
    ON_OFF_GREEDY = "onoff"
    SMALL_PACKET_MULTI_SESSION = "multisession"

    @classmethod
    def parse(cls, text: str) -> "GenKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown generator kind {text!r} (expected one of {names})") from None


@dataclass(frozen=True)
class GeneratorSpec:
    """One traffic source.

    ``rate`` is the offered load in bytes/sec; for the multi-session kind it
    is the aggregate over all sessions. ``length`` is the packet size, or
    the minimum size when ``length_max`` asks for uniform sizes (Poisson
    only). On/off sources send at ``rate`` for ``on_time`` then stay silent
    for ``off_time``.
    """

    kind: GenKind
    flow_ids: tuple[int, ...]
    user_id: int
    rate: float
    length: int
    tos_class: TosClass = TosClass.BULK
    length_max: Optional[int] = None
    start: SimTime = 0.0
    stop: Optional[SimTime] = None
    seed: int = 0
    on_time: float = 1.0
    off_time: float = 1.0

    def check(self) -> None:
        if not self.flow_ids:
            raise InvalidSpec("generator needs at least one flow id", field="flow_ids")
        if self.kind is not GenKind.SMALL_PACKET_MULTI_SESSION and len(self.flow_ids) != 1:
            raise InvalidSpec(f"{self.kind.value} generator drives exactly one flow", field="flow_ids")
        if len(set(self.flow_ids)) != len(self.flow_ids):
            raise InvalidSpec("generator flow ids must be distinct", field="flow_ids")
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise InvalidSpec(f"rate must be positive, got {self.rate!r}", field="rate")
        if self.length < 1:
            raise InvalidSpec(f"length must be >= 1, got {self.length!r}", field="length")
        if self.length_max is not None:
            if self.kind is not GenKind.POISSON:
                raise InvalidSpec("length_max is only supported by poisson generators", field="length_max")
            if self.length_max < self.length:
                raise InvalidSpec("length_max must be >= length", field="length_max")
        if self.start < 0:
            raise InvalidSpec("start must be >= 0", field="start")
        if self.stop is not None and self.stop <= self.start:
            raise InvalidSpec("stop must be after start", field="stop")
        if self.kind is GenKind.ON_OFF_GREEDY and (self.on_time <= 0 or self.off_time <= 0):
            raise InvalidSpec("on_time and off_time must be positive", field="on_time")


def _cbr_times(start, end, interval, offset=0.0):
    # k * interval rather than a running sum, so times do not drift
    out = []
    k = 0
    while True:
        t = start + offset + k * interval
        if t >= end:
            return out
        out.append(t)
        k += 1


def generate(spec: GeneratorSpec, horizon: SimTime) -> list[Packet]:
    """Time-ordered packets from one generator; ids are local (0, 1, ...)."""
    if not horizon > 0:
        raise InvalidSpec(f"horizon must be positive, got {horizon!r}", field="horizon")
    spec.check()
    end = horizon if spec.stop is None else min(spec.stop, horizon)
    # (time, session index, flow id, length)
    items: list[tuple[float, int, int, int]] = []
    fid = spec.flow_ids[0]

    if spec.kind is GenKind.CBR:
        items = [(t, 0, fid, spec.length) for t in _cbr_times(spec.start, end, spec.length / spec.rate)]
    elif spec.kind is GenKind.POISSON:
        rng = random.Random(spec.seed)
        hi = spec.length_max or spec.length
        lam = spec.rate / ((spec.length + hi) / 2)
        t = spec.start
        while True:
            t += -math.log(1.0 - rng.random()) / lam
            if t >= end:
                break
            size = spec.length if hi == spec.length else spec.length + int(rng.random() * (hi - spec.length + 1))
            items.append((t, 0, fid, size))
    elif spec.kind is GenKind.ON_OFF_GREEDY:
        interval = spec.length / spec.rate
        period = spec.on_time + spec.off_time
        cycle = 0
        while True:
            on_start = spec.start + cycle * period
            if on_start >= end:
                break
            on_end = min(on_start + spec.on_time, end)
            items.extend((t, 0, fid, spec.length) for t in _cbr_times(on_start, on_end, interval))
            cycle += 1
    else:
        k = len(spec.flow_ids)
        interval = spec.length * k / spec.rate
        for j, f in enumerate(spec.flow_ids):
            # Stagger sessions evenly so the aggregate is smooth.
            items.extend((t, j, f, spec.length) for t in _cbr_times(spec.start, end, interval, j * interval / k))
        items.sort()

    return [
        Packet(id=i, flow_id=f, user_id=spec.user_id, length_bytes=size, tos_class=spec.tos_class, arrival=t)
        for i, (t, _, f, size) in enumerate(items)
    ]


def merge(streams: Sequence[Sequence[Packet]]) -> list[Packet]:
    """Interleave per-generator streams by time and assign run-wide ids.

    Simultaneous arrivals are ordered by generator index, then local id.
    """
    ordered = heapq.merge(*[[((p.arrival, g, p.id), p) for p in s] for g, s in enumerate(streams)])
    return [replace(p, id=i) for i, (_, p) in enumerate(ordered)]


def generate_all(specs: Sequence[GeneratorSpec], horizon: SimTime) -> list[Packet]:
    return merge([generate(s, horizon) for s in specs])
