"""Domain types shared by the scheduler, engine and tooling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from .errors import (
    DuplicateFlowId,
    NonPositiveCapacity,
    NonPositiveWeight,
    ValidationError,
)

# Real time in seconds and virtual time in bytes per unit weight. Both are
# plain floats; the aliases document intent at call sites.
SimTime = float
VirtualTime = float


class TosClass(Enum):
    """Traffic class standing in for the IPv4 ToS / IPv6 priority field."""

    VOICE = "voice"
    VIDEO = "video"
    INTERACTIVE = "interactive"
    BULK = "bulk"

    @classmethod
    def parse(cls, text: str) -> "TosClass":
        try:
            return cls(text.strip().lower())
        except ValueError:
            names = ", ".join(c.value for c in cls)
            raise ValueError(f"unknown traffic class {text!r} (expected one of {names})") from None


@dataclass(frozen=True, slots=True)
class Packet:
    id: int
    flow_id: int
    user_id: int
    length_bytes: int
    tos_class: TosClass
    arrival: SimTime


@dataclass(frozen=True, slots=True)
class FlowDescriptor:
    flow_id: int
    weight_phi: float
    tos_class: TosClass
    user_id: int


@dataclass(frozen=True, slots=True)
class LinkConfig:
    capacity_bytes_per_sec: float
    buffer_limit_packets: Optional[int] = None  # None means unbounded


@dataclass(frozen=True)
class Scenario:
    """A validated set of flows sharing one output link."""

    flows: tuple[FlowDescriptor, ...]
    link: LinkConfig

    def flow(self, flow_id: int) -> FlowDescriptor:
        for f in self.flows:
            if f.flow_id == flow_id:
                return f
        raise KeyError(flow_id)

    @property
    def weights(self) -> dict[int, float]:
        return {f.flow_id: f.weight_phi for f in self.flows}


def _finite_positive(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0


def validate_scenario(flows: Iterable[FlowDescriptor], link: LinkConfig) -> Scenario:
    """Check every type invariant and return an immutable :class:`Scenario`.

    Raises the specific :class:`ValidationError` subclass for the first
    violation found; the exception's ``field`` names the offending input.
    """
    flows = tuple(flows)
    if not _finite_positive(link.capacity_bytes_per_sec):
        raise NonPositiveCapacity(
            f"link capacity must be positive, got {link.capacity_bytes_per_sec!r}",
            field="capacity_bytes_per_sec",
        )
    limit = link.buffer_limit_packets
    if limit is not None and (isinstance(limit, bool) or not isinstance(limit, int) or limit < 1):
        raise ValidationError(
            f"buffer limit must be a positive integer or unbounded, got {limit!r}",
            field="buffer_limit_packets",
        )
    seen = set()
    for f in flows:
        if f.flow_id in seen:
            raise DuplicateFlowId(f"flow id {f.flow_id} appears more than once", field="flow_id")
        seen.add(f.flow_id)
        if not _finite_positive(f.weight_phi):
            raise NonPositiveWeight(
                f"flow {f.flow_id}: weight must be positive, got {f.weight_phi!r}",
                field="weight_phi",
            )
        if not isinstance(f.tos_class, TosClass):
            raise ValidationError(f"flow {f.flow_id}: bad traffic class {f.tos_class!r}", field="tos_class")
    return Scenario(flows=flows, link=link)


def check_packet(pkt: Packet) -> None:
    if pkt.length_bytes < 1:
        raise ValidationError(f"packet {pkt.id}: length must be >= 1 byte", field="length_bytes")
    if not (math.isfinite(pkt.arrival) and pkt.arrival >= 0):
        raise ValidationError(f"packet {pkt.id}: arrival must be finite and >= 0", field="arrival")
