"""Scenario config files.

Line-oriented ``key = value`` pairs under ``[section]`` headers, with
repeatable ``[[flow]]`` and ``[[generator]]`` blocks. ``#`` starts a
comment. Lists are comma separated. Unknown keys are rejected so a typo
never silently falls back to a default.

Example::

    [link]
    capacity = 10000          # bytes/sec
    buffer = unbounded        # or a packet count

    [[flow]]
    id = 1
    weight = 1
    class = voice             # voice | video | interactive | bulk
    user = 1

    [[generator]]
    kind = cbr                # cbr | poisson | onoff | multisession
    flows = 1
    rate = 2500               # bytes/sec (aggregate for multisession)
    length = 100

    [policy]
    level.voice = 1

    [run]
    horizon = 60
    disciplines = wfq, jq

Defaults for every optional key are in ``SECTION_KEYS``; ``emit_config``
writes them all out explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .errors import ConfigError, MissingRequired, ParseError, UnknownKey, ValidationError
from .model import FlowDescriptor, LinkConfig, Scenario, TosClass, validate_scenario
from .policy import DEFAULT_LEVELS, LevelTable, PolicyConfig
from .sched import Discipline
from .traffic import GeneratorSpec, GenKind


@dataclass(frozen=True)
class RunConfig:
    horizon: float = 10.0
    seed: int = 1
    disciplines: tuple[Discipline, ...] = (Discipline.WFQ, Discipline.JQ)
    warmup: float = 0.1
    output_dir: str = "out"
    attacker_user: Optional[int] = None


@dataclass(frozen=True)
class ScenarioConfig:
    link: LinkConfig
    flows: tuple[FlowDescriptor, ...]
    generators: tuple[GeneratorSpec, ...]
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def scenario(self) -> Scenario:
        return validate_scenario(self.flows, self.link)

    def attacker_users(self) -> list[int]:
        if self.run.attacker_user is not None:
            return [self.run.attacker_user]
        greedy = (GenKind.ON_OFF_GREEDY, GenKind.SMALL_PACKET_MULTI_SESSION)
        return sorted({g.user_id for g in self.generators if g.kind in greedy})


def _pos_int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _buffer(text):
    if text.lower() in ("unbounded", "none", "inf"):
        return None
    return int(text)


def _opt_float(text):
    return None if text.lower() == "none" else float(text)


def _opt_int(text):
    return None if text.lower() == "none" else int(text)


def _int_list(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _disciplines(text):
    return tuple(Discipline.parse(x) for x in text.split(",") if x.strip())


_REQUIRED = object()

# section -> key -> (converter, default)
SECTION_KEYS: dict[str, dict[str, tuple[Callable, object]]] = {
    "link": {"capacity": (float, _REQUIRED), "buffer": (_buffer, None)},
    "flow": {
        "id": (int, _REQUIRED),
        "weight": (float, _REQUIRED),
        "class": (TosClass.parse, TosClass.BULK),
        "user": (_opt_int, None),  # defaults to the flow id
    },
    "generator": {
        "kind": (GenKind.parse, _REQUIRED),
        "flows": (_int_list, _REQUIRED),
        "rate": (float, _REQUIRED),
        "length": (int, _REQUIRED),
        "length_max": (_opt_int, None),
        "user": (_opt_int, None),  # defaults to the first flow's user
        "class": (lambda t: None if t.lower() == "none" else TosClass.parse(t), None),
        "start": (float, 0.0),
        "stop": (_opt_float, None),
        "seed": (int, 0),
        "on_time": (float, 1.0),
        "off_time": (float, 1.0),
    },
    "policy": {
        "window": (float, 0.1),
        "rate_fraction": (float, 1.0),
        "backlog_threshold": (_pos_int, 50),
        "fl_scale": (float, LevelTable().fl_scale),
        "usr_scale": (float, PolicyConfig().usr_scale),
        "tau": (float, 1.0),
        "active_tau_multiple": (float, 5.0),
        "default_level": (float, 4.0),
        **{f"level.{c.value}": (float, DEFAULT_LEVELS[c]) for c in TosClass},
    },
    "run": {
        "horizon": (float, 10.0),
        "seed": (int, 1),
        "disciplines": (_disciplines, (Discipline.WFQ, Discipline.JQ)),
        "warmup": (float, 0.1),
        "output_dir": (str, "out"),
        "attacker_user": (_opt_int, None),
    },
}
_REPEATED = {"flow", "generator"}


@dataclass
class _Block:
    name: str
    line: int
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def get(self, key):
        conv, default = SECTION_KEYS[self.name][key]
        if key in self.values:
            return self.values[key]
        if default is _REQUIRED:
            raise MissingRequired(f"{self.name}.{key}", self.line)
        return default

    def line_of(self, key):
        return self.lines.get(key, self.line)


def _tokenize(text: str) -> list[_Block]:
    blocks: list[_Block] = []
    singles: dict[str, _Block] = {}
    current: Optional[_Block] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[[") and line.endswith("]]"):
            name = line[2:-2].strip()
            if name not in _REPEATED:
                raise ParseError(f"unknown repeated section [[{name}]]", lineno)
            current = _Block(name, lineno)
            blocks.append(current)
        elif line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in SECTION_KEYS or name in _REPEATED:
                raise ParseError(f"unknown section [{name}]", lineno)
            if name in singles:
                raise ParseError(f"section [{name}] appears twice", lineno)
            current = singles[name] = _Block(name, lineno)
            blocks.append(current)
        elif "=" in line:
            if current is None:
                raise ParseError("key outside of any section", lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in SECTION_KEYS[current.name]:
                raise UnknownKey(key, lineno)
            if key in current.values:
                raise ParseError(f"duplicate key {key!r}", lineno)
            conv = SECTION_KEYS[current.name][key][0]
            try:
                current.values[key] = conv(value)
            except ValueError as e:
                raise ParseError(f"bad value for {key!r}: {e}", lineno) from None
            current.lines[key] = lineno
        else:
            raise ParseError(f"expected 'key = value' or a section header, got {raw.strip()!r}", lineno)
    return blocks


def parse_config(text: str) -> ScenarioConfig:
    blocks = _tokenize(text)
    single = {b.name: b for b in blocks if b.name not in _REPEATED}
    link_b = single.get("link") or _Block("link", 1)
    policy_b = single.get("policy") or _Block("policy", 1)
    run_b = single.get("run") or _Block("run", 1)

    link = LinkConfig(link_b.get("capacity"), link_b.get("buffer"))
    try:
        validate_scenario((), link)
    except ValidationError as e:
        key = "capacity" if e.field == "capacity_bytes_per_sec" else "buffer"
        raise type(e)(str(e), e.field, link_b.line_of(key)) from None

    flows = []
    flow_blocks = [b for b in blocks if b.name == "flow"]
    if not flow_blocks:
        raise MissingRequired("[[flow]]")
    for b in flow_blocks:
        fid = b.get("id")
        user = b.get("user")
        flows.append(FlowDescriptor(fid, b.get("weight"), b.get("class"), fid if user is None else user))
        try:
            validate_scenario(flows, link)
        except ValidationError as e:
            key = {"weight_phi": "weight", "flow_id": "id"}.get(e.field, "id")
            raise type(e)(str(e), e.field, b.line_of(key)) from None
    by_id = {f.flow_id: f for f in flows}

    gens = []
    for b in (b for b in blocks if b.name == "generator"):
        fids = b.get("flows")
        for fid in fids:
            if fid not in by_id:
                raise ConfigError(f"generator drives undeclared flow {fid}", b.line_of("flows"))
        first = by_id[fids[0]] if fids else None
        user = b.get("user")
        if user is None and first is not None:
            user = first.user_id
        for fid in fids:
            if by_id[fid].user_id != user:
                raise ConfigError(f"flow {fid} belongs to user {by_id[fid].user_id}, generator to {user}",
                                  b.line_of("flows"))
        cls = b.get("class")
        spec = GeneratorSpec(
            kind=b.get("kind"), flow_ids=fids, user_id=user if user is not None else 0,
            rate=b.get("rate"), length=b.get("length"),
            tos_class=cls if cls is not None else (first.tos_class if first else TosClass.BULK),
            length_max=b.get("length_max"), start=b.get("start"), stop=b.get("stop"),
            seed=b.get("seed"), on_time=b.get("on_time"), off_time=b.get("off_time"),
        )
        try:
            spec.check()
        except ValidationError as e:
            raise type(e)(str(e), e.field, b.line_of(e.field) if e.field in b.lines else b.line) from None
        gens.append(spec)

    try:
        levels = LevelTable(
            levels={c: policy_b.get(f"level.{c.value}") for c in TosClass},
            default_level=policy_b.get("default_level"),
            fl_scale=policy_b.get("fl_scale"),
        )
        policy = PolicyConfig(
            window=policy_b.get("window"),
            rate_threshold_fraction=policy_b.get("rate_fraction"),
            backlog_threshold_packets=policy_b.get("backlog_threshold"),
            levels=levels,
            usr_scale=policy_b.get("usr_scale"),
            tau=policy_b.get("tau"),
            active_tau_multiple=policy_b.get("active_tau_multiple"),
        )
    except ValueError as e:
        raise ConfigError(f"[policy]: {e}", policy_b.line) from None

    run = RunConfig(
        horizon=run_b.get("horizon"),
        seed=run_b.get("seed"),
        disciplines=run_b.get("disciplines"),
        warmup=run_b.get("warmup"),
        output_dir=run_b.get("output_dir"),
        attacker_user=run_b.get("attacker_user"),
    )
    if not run.horizon > 0:
        raise ConfigError("horizon must be positive", run_b.line_of("horizon"))
    if not 0 <= run.warmup < 1:
        raise ConfigError("warmup must be in [0, 1)", run_b.line_of("warmup"))
    if not run.disciplines:
        raise ConfigError("at least one discipline is required", run_b.line_of("disciplines"))
    if len(set(run.disciplines)) != len(run.disciplines):
        raise ConfigError("disciplines listed twice", run_b.line_of("disciplines"))
    return ScenarioConfig(link, tuple(flows), tuple(gens), policy, run)


def _v(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (TosClass, GenKind, Discipline)):
        return x.value
    if isinstance(x, tuple):
        return ", ".join(_v(i) for i in x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def emit_config(cfg: ScenarioConfig) -> str:
    """Canonical text form with every key explicit; re-parses to ``cfg``."""
    out = ["[link]", f"capacity = {_v(cfg.link.capacity_bytes_per_sec)}",
           f"buffer = {'unbounded' if cfg.link.buffer_limit_packets is None else cfg.link.buffer_limit_packets}"]
    for f in cfg.flows:
        out += ["", "[[flow]]", f"id = {f.flow_id}", f"weight = {_v(f.weight_phi)}",
                f"class = {_v(f.tos_class)}", f"user = {f.user_id}"]
    for g in cfg.generators:
        out += ["", "[[generator]]", f"kind = {_v(g.kind)}", f"flows = {_v(g.flow_ids)}",
                f"rate = {_v(g.rate)}", f"length = {g.length}", f"length_max = {_v(g.length_max)}",
                f"user = {g.user_id}", f"class = {_v(g.tos_class)}", f"start = {_v(g.start)}",
                f"stop = {_v(g.stop)}", f"seed = {g.seed}", f"on_time = {_v(g.on_time)}",
                f"off_time = {_v(g.off_time)}"]
    p = cfg.policy
    out += ["", "[policy]", f"window = {_v(p.window)}", f"rate_fraction = {_v(p.rate_threshold_fraction)}",
            f"backlog_threshold = {p.backlog_threshold_packets}", f"fl_scale = {_v(p.levels.fl_scale)}",
            f"usr_scale = {_v(p.usr_scale)}", f"tau = {_v(p.tau)}",
            f"active_tau_multiple = {_v(p.active_tau_multiple)}",
            f"default_level = {_v(p.levels.default_level)}"]
    out += [f"level.{c.value} = {_v(p.levels.levels.get(c, p.levels.default_level))}" for c in TosClass]
    r = cfg.run
    out += ["", "[run]", f"horizon = {_v(r.horizon)}", f"seed = {r.seed}", f"disciplines = {_v(r.disciplines)}",
            f"warmup = {_v(r.warmup)}", f"output_dir = {r.output_dir}", f"attacker_user = {_v(r.attacker_user)}"]
    return "\n".join(out) + "\n"


def with_overrides(cfg: ScenarioConfig, seed: Optional[int] = None, horizon: Optional[float] = None) -> ScenarioConfig:
    run = cfg.run
    if seed is not None:
        run = replace(run, seed=seed)
    if horizon is not None:
        if not horizon > 0:
            raise ConfigError("horizon must be positive")
        run = replace(run, horizon=horizon)
    return replace(cfg, run=run)
