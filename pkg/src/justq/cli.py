"""Command line entry point: ``justq {validate,run,compare} CONFIG``.

Exit status is 0 on success, 1 for a bad config or invocation and 2 for a
failure during the run itself.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import ScenarioConfig, emit_config, parse_config, with_overrides
from .engine import Experiment, ScheduleTrace, fmt, make_arrivals, simulate, trace_to_csv
from .errors import ConfigError, ValidationError
from .metrics import (
    attacker_share,
    class_delay,
    flow_stats,
    jain_index,
    served_in_window,
    stats_to_csv,
)
from .oracle import gps_simulate
from .traffic import RNG_ALGORITHM

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


def write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _clean(x):
    # JSON has no NaN; undefined statistics become null
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def experiment_of(cfg: ScenarioConfig) -> Experiment:
    return Experiment(cfg.scenario, cfg.generators, cfg.policy, cfg.run.horizon, cfg.run.seed)


def summarize(cfg: ScenarioConfig, trace: ScheduleTrace) -> dict:
    window = (cfg.run.warmup * trace.horizon, trace.horizon)
    stats = flow_stats(trace, window)
    goodput = [s.goodput for s in stats]
    attackers = cfg.attacker_users()
    honest = [s.goodput for s in stats if cfg.scenario.flow(s.flow_id).user_id not in attackers]
    out = {
        "discipline": trace.discipline.value,
        "goodput": math.fsum(goodput),
        "drops": sum(s.drops for s in stats),
        "jain_index": jain_index(goodput) if any(goodput) else math.nan,
        "jain_honest": jain_index(honest) if honest and any(honest) else math.nan,
        "attacker_user": attackers[0] if attackers else None,
        "attacker_share": attacker_share(trace, attackers[0], window) if attackers else math.nan,
    }
    for cls in sorted({c for c in trace.flow_classes.values()}, key=lambda c: c.value):
        try:
            mean, _ = class_delay(trace, cls, window)
        except ValueError:
            mean = math.nan
        out[f"mean_delay_{cls.value}"] = mean
    return out


def _table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[c for c in cols]] + [[fmt(r[c]) if not isinstance(r[c], float) else f"{r[c]:.6g}" for c in cols]
                                   for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells) + "\n"


def _rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([fmt(v) for v in r.values()])
    return buf.getvalue()


def _outputs(cfg: ScenarioConfig, compare: bool) -> list[str]:
    names = []
    for d in cfg.run.disciplines:
        names += [f"trace_{d.value}.csv", f"stats_{d.value}.csv", f"meta_{d.value}.json"]
    if compare:
        names += ["summary.csv", "summary.json", "flows_vs_gps.csv"]
    return names


def execute(cfg: ScenarioConfig, out_dir: Path, force: bool, compare: bool, stdout) -> None:
    names = _outputs(cfg, compare)
    if out_dir.exists() and not force:
        clash = [n for n in names if (out_dir / n).exists()]
        if clash:
            raise UsageError(f"{out_dir / clash[0]} exists; pass --force to overwrite")
    exp = experiment_of(cfg)
    canonical = emit_config(cfg)
    arrivals = make_arrivals(exp)
    traces = {}
    for d in cfg.run.disciplines:
        traces[d] = simulate(exp.scenario, arrivals, d, exp.horizon, exp.policy)

    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for d, trace in traces.items():
        window = (cfg.run.warmup * trace.horizon, trace.horizon)
        write_atomic(out_dir / f"trace_{d.value}.csv", trace_to_csv(trace))
        write_atomic(out_dir / f"stats_{d.value}.csv", stats_to_csv(d.value, flow_stats(trace, window)))
        meta = {
            "discipline": d.value,
            "seed": cfg.run.seed,
            "horizon": cfg.run.horizon,
            "rng_algorithm": RNG_ALGORITHM,
            "version": f"justq {__version__}",
            "config": canonical,
            "arrivals": trace.arrivals,
            "transmitted": len(trace.transmitted()),
            "dropped": len(trace.dropped()),
            "backlog": len(trace.backlog()),
        }
        write_atomic(out_dir / f"meta_{d.value}.json", _json(meta))
        summaries.append(summarize(cfg, trace))

    if not compare:
        for s in summaries:
            print(f"{s['discipline']}: goodput {s['goodput']:.6g} B/s, drops {s['drops']}", file=stdout)
        return

    window = (cfg.run.warmup * exp.horizon, exp.horizon)
    gps = gps_simulate(cfg.flows, arrivals, cfg.link).served_bytes(*window)
    flow_rows = []
    for f in cfg.flows:
        share = gps.get(f.flow_id, 0.0)
        row = {"flow_id": f.flow_id, "class": f.tos_class.value, "user": f.user_id, "gps_bytes": share}
        for d, trace in traces.items():
            served = served_in_window(trace, window)[f.flow_id]
            row[f"served_{d.value}"] = served
            row[f"deviation_{d.value}"] = (served - share) / share if share > 0 else math.nan
        flow_rows.append(row)
    summary_rows = [{k: _clean(v) for k, v in s.items()} for s in summaries]
    write_atomic(out_dir / "summary.csv", _rows_csv(summaries))
    write_atomic(out_dir / "flows_vs_gps.csv", _rows_csv(flow_rows))
    write_atomic(out_dir / "summary.json", _json({
        "disciplines": summary_rows,
        "flows": [{k: _clean(v) for k, v in r.items()} for r in flow_rows],
        "window": list(window),
    }))
    stdout.write(_table(summaries))
    stdout.write("\n")
    stdout.write(_table(flow_rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="justq", description="WFQ / Just Queueing link simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("validate", "parse and validate a config"),
                        ("run", "run every configured discipline"),
                        ("compare", "run and add a side-by-side summary with GPS reference shares")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", type=Path)
        if name != "validate":
            p.add_argument("--out", type=Path, help="output directory (default: run.output_dir)")
            p.add_argument("--force", action="store_true", help="overwrite existing output files")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--horizon", type=float, help="override run.horizon (seconds)")
    return parser


def run_cli(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        text = args.config.read_text(encoding="utf-8")
        cfg = with_overrides(parse_config(text), seed=args.seed, horizon=args.horizon)
        cfg.scenario  # full validation
    except (OSError, ConfigError, ValidationError) as e:
        print(f"justq: {args.config}: {e}", file=stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print("OK", file=stdout)
        return EXIT_OK
    out_dir = args.out if args.out is not None else Path(cfg.run.output_dir)
    try:
        execute(cfg, out_dir, args.force, args.command == "compare", stdout)
    except UsageError as e:
        print(f"justq: {e}", file=stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - every runtime failure maps to exit 2
        print(f"justq: run failed: {type(e).__name__}: {e}", file=stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
