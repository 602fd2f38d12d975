"""Scenario builders and an independent time-stepped fluid GPS oracle."""

from __future__ import annotations

import math
import random
from collections import deque

from justq.engine import Experiment
from justq.model import FlowDescriptor, LinkConfig, Packet, TosClass, validate_scenario
from justq.policy import LevelTable, PolicyConfig
from justq.traffic import GeneratorSpec, GenKind

CLASSES = list(TosClass)

NO_CHARGING = PolicyConfig(
    levels=LevelTable(levels={c: 0.0 for c in TosClass}, default_level=0.0, fl_scale=1.0),
    usr_scale=0.0,
)


def pkt(pid, flow, length, arrival, user=None, cls=TosClass.BULK):
    return Packet(pid, flow, flow if user is None else user, length, cls, arrival)


def scenario(weights, capacity, buffer=None, classes=None, users=None):
    flows = []
    for i, (fid, w) in enumerate(sorted(weights.items())):
        cls = classes[fid] if classes else TosClass.BULK
        user = users[fid] if users else fid
        flows.append(FlowDescriptor(fid, w, cls, user))
    return validate_scenario(flows, LinkConfig(capacity, buffer))


def random_experiment(seed, max_flows=8, max_packets=10_000, policy=None, allow_buffer=True):
    """A randomized scenario whose expected packet count stays under ``max_packets``."""
    rng = random.Random(seed)
    n = rng.randint(2, max_flows)
    cap = rng.choice([1000.0, 12500.0, 125000.0])
    buffer = rng.choice([None, None, rng.randint(5, 200)]) if allow_buffer else None
    flows, gens = [], []
    for fid in range(1, n + 1):
        user = rng.randint(1, max(1, n // 2))
        cls = rng.choice(CLASSES)
        flows.append(FlowDescriptor(fid, rng.choice([0.5, 1.0, 1.0, 2.0, 3.5]), cls, user))
    # Assign users consistently to generators: one generator per flow.
    load = rng.uniform(0.6, 1.8)
    shares = [rng.random() + 0.1 for _ in flows]
    total = sum(shares)
    for f, s in zip(flows, shares):
        rate = cap * load * s / total
        kind = rng.choice([GenKind.CBR, GenKind.POISSON, GenKind.POISSON, GenKind.ON_OFF_GREEDY])
        length = rng.choice([64, 100, 576, 1000, 1500])
        length_max = rng.choice([None, length + rng.randint(0, 1400)]) if kind is GenKind.POISSON else None
        gens.append(GeneratorSpec(kind, (f.flow_id,), f.user_id, rate, length, f.tos_class,
                                  length_max=length_max, start=rng.choice([0.0, rng.uniform(0, 1)]),
                                  seed=rng.randint(0, 10**6), on_time=rng.uniform(0.05, 0.5),
                                  off_time=rng.uniform(0.05, 0.5)))
    # Horizon so the expected number of packets is about max_packets / 2.
    pkt_rate = sum(g.rate / ((g.length + (g.length_max or g.length)) / 2) for g in gens)
    horizon = max(0.5, min(120.0, 0.5 * max_packets / pkt_rate))
    sc = validate_scenario(flows, LinkConfig(cap, buffer))
    return Experiment(sc, tuple(gens), policy or PolicyConfig(), horizon, seed)


def stepped_gps(weights, arrivals, capacity, dt=1e-4):
    """Fixed-step fluid GPS: per step, backlogged flows split capacity by weight.

    Arrivals join at the first step boundary at or after their arrival. A
    flow's per-step service is applied to its queue in order, with the
    completing packet's departure interpolated inside the step; capacity a
    flow cannot use because it empties mid-step is handed to the others in
    the same step.
    """
    queues = {f: deque() for f in weights}
    pending = deque(sorted(arrivals, key=lambda p: (p.arrival, p.id)))
    departures = {}
    k = 0
    while pending or any(queues.values()):
        t = k * dt
        while pending and pending[0].arrival <= t + 1e-12:
            p = pending.popleft()
            queues[p.flow_id].append([p.id, float(p.length_bytes)])
        active = [f for f in weights if queues[f]]
        if not active:
            k = max(k + 1, math.ceil(pending[0].arrival / dt - 1e-9))
            continue
        budget = capacity * dt  # bytes this step
        used_time = {f: 0.0 for f in active}
        while budget > 1e-12 and active:
            wsum = sum(weights[f] for f in active)
            spare = 0.0
            still = []
            for f in active:
                give = budget * weights[f] / wsum
                rate = capacity * weights[f] / wsum
                q = queues[f]
                while give > 0 and q:
                    need = q[0][1]
                    if need <= give:
                        used_time[f] += need / rate
                        departures[q.popleft()[0]] = t + min(used_time[f], dt)
                        give -= need
                    else:
                        q[0][1] -= give
                        used_time[f] += give / rate
                        give = 0.0
                spare += give
                if q and give == 0.0:
                    still.append(f)
            budget = spare
            active = still
        k += 1
    return departures
