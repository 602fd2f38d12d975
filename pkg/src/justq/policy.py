"""Congestion detection and charge computation for Just Queueing.

Outside congestion every packet gets :data:`~justq.sched.NO_CHARGE`. Once the
detector trips, a packet is charged a flow level from its traffic class
(added to its virtual start) and a user level from its sender's recent rate
above the equal per-user share (added to its length).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .model import Packet, SimTime, TosClass
from .sched import NO_CHARGE, ChargeInputs

# Voice and Bulk anchor the scale at 1 and 4; Video and Interactive are
# interpolated between them.
DEFAULT_LEVELS: dict[TosClass, float] = {
    TosClass.VOICE: 1.0,
    TosClass.VIDEO: 2.0,
    TosClass.INTERACTIVE: 3.0,
    TosClass.BULK: 4.0,
}


@dataclass(frozen=True)
class LevelTable:
    levels: Mapping[TosClass, float] = field(default_factory=lambda: dict(DEFAULT_LEVELS))
    default_level: float = 4.0
    fl_scale: float = 1.0

    def __post_init__(self):
        if any(v < 0 for v in self.levels.values()) or self.default_level < 0 or self.fl_scale < 0:
            raise ValueError("levels and fl_scale must be non-negative")
        voice = self.levels.get(TosClass.VOICE, self.default_level)
        bulk = self.levels.get(TosClass.BULK, self.default_level)
        if voice > bulk:
            raise ValueError(f"voice level {voice} exceeds bulk level {bulk}")


def flow_level(table: LevelTable, tos_class: TosClass) -> float:
    return table.fl_scale * table.levels.get(tos_class, table.default_level)


@dataclass
class UserScore:
    user_id: int
    ewma_rate: float = 0.0
    usr_scale: float = 0.0
    fair_share: float = math.inf
    last_seen: Optional[SimTime] = None


def user_level(score: UserScore) -> float:
    """Bytes added to each of this user's packets while congested."""
    if score.fair_share <= 0:
        raise ValueError("fair share must be positive")
    excess = score.ewma_rate - score.fair_share
    if excess <= 0 or score.usr_scale == 0:
        return 0.0
    return score.usr_scale * excess


def observe_arrival(scores: dict[int, UserScore], pkt: Packet, now: SimTime, tau: float = 1.0) -> dict[int, UserScore]:
    """Fold one arrival into its user's exponentially decayed byte rate."""
    s = scores.get(pkt.user_id)
    if s is None:
        s = scores[pkt.user_id] = UserScore(pkt.user_id)
    if s.last_seen is not None:
        s.ewma_rate *= math.exp(-(now - s.last_seen) / tau)
    s.ewma_rate += pkt.length_bytes / tau
    s.last_seen = now
    return scores


@dataclass
class CongestionDetector:
    window: float = 0.1
    rate_threshold_fraction: float = 1.0
    backlog_threshold_packets: int = 50
    arrived_bytes_in_window: int = 0
    _recent: deque = field(default_factory=deque, repr=False)
    _held_until: float = -math.inf

    def record(self, now: SimTime, length: int) -> int:
        """Add an arrival and drop those older than one window; returns the byte count."""
        recent = self._recent
        recent.append((now, length))
        self.arrived_bytes_in_window += length
        cutoff = now - self.window
        while recent[0][0] <= cutoff:
            self.arrived_bytes_in_window -= recent.popleft()[1]
        return self.arrived_bytes_in_window

    def evaluate(self, now: SimTime, backlog_packets: int, capacity: float) -> bool:
        """Detector verdict with hysteresis: a trip holds for one full window."""
        if now < self._held_until:
            return True
        if detect(self, now, backlog_packets, self.arrived_bytes_in_window, capacity):
            self._held_until = now + self.window
            return True
        return False


def detect(
    detector: CongestionDetector,
    now: SimTime,
    backlog_packets: int,
    window_arrived_bytes: float,
    capacity: float,
) -> bool:
    rate = window_arrived_bytes / detector.window
    return rate > detector.rate_threshold_fraction * capacity or backlog_packets > detector.backlog_threshold_packets


@dataclass(frozen=True)
class PolicyConfig:
    window: float = 0.1
    rate_threshold_fraction: float = 1.0
    backlog_threshold_packets: int = 50
    levels: LevelTable = field(default_factory=LevelTable)
    usr_scale: float = 0.1
    tau: float = 1.0
    # Users with no arrival for this many tau stop counting toward the fair share.
    active_tau_multiple: float = 5.0

    def __post_init__(self):
        if self.window <= 0 or self.tau <= 0:
            raise ValueError("window and tau must be positive")
        if self.usr_scale < 0 or self.rate_threshold_fraction <= 0 or self.backlog_threshold_packets < 0:
            raise ValueError("usr_scale, rate fraction and backlog threshold must be non-negative")
        if self.active_tau_multiple <= 0:
            raise ValueError("active_tau_multiple must be positive")


class Policy:
    """Per-run charging state, fed once per arrival by the engine."""

    def __init__(self, config: PolicyConfig, capacity: float):
        self.config = config
        self.capacity = capacity
        self.detector = CongestionDetector(
            config.window, config.rate_threshold_fraction, config.backlog_threshold_packets
        )
        self.scores: dict[int, UserScore] = {}

    def fair_share(self, now: SimTime) -> float:
        horizon = self.config.active_tau_multiple * self.config.tau
        active = sum(1 for s in self.scores.values() if s.last_seen is not None and now - s.last_seen <= horizon)
        return self.capacity / max(active, 1)

    def on_arrival(self, pkt: Packet, now: SimTime, backlog_packets: int, charge: bool = True) -> ChargeInputs:
        cfg = self.config
        observe_arrival(self.scores, pkt, now, cfg.tau)
        self.detector.record(now, pkt.length_bytes)
        if not self.detector.evaluate(now, backlog_packets, self.capacity):
            return NO_CHARGE
        if not charge:
            return CONGESTED_NO_CHARGE
        score = self.scores[pkt.user_id]
        score.usr_scale = cfg.usr_scale
        score.fair_share = self.fair_share(now)
        return ChargeInputs(flow_level(cfg.levels, pkt.tos_class), user_level(score), True)


CONGESTED_NO_CHARGE = ChargeInputs(0.0, 0.0, True)
