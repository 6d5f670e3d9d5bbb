"""Command-line entry point.

Exit codes: 0 ran clean, 2 the simulated detector flagged an error,
1 the tool itself failed (bad input, oscillation, I/O).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, protocol
from .dsl import ParseError, parse_fault_spec, parse_netlist, parse_scenario, serialize_scenario
from .engine import ConductionSemantics, ConflictMode, RunError, SimConfig, SimulationError, run_events
from .faults import FaultError
from .gates import build_parity_detector, sweep
from .ipc import PERISTALTIC_STEPS, Whistle, run_ipc
from .netlist import VAC, NetlistError, PortRole, budget, validate_netlist

log = logging.getLogger("pneusim")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ERROR_DETECTED = 2


class CliError(Exception):
    pass


def parse_config(items) -> SimConfig:
    """Build a SimConfig from KEY=VALUE strings."""
    kwargs = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        key = key.strip().lower().replace("-", "_")
        if not sep:
            raise CliError(f"--config expects KEY=VALUE, got {item!r}")
        try:
            if key in ("semantics", "conduction_semantics"):
                kwargs["conduction_semantics"] = ConductionSemantics(value.upper())
            elif key in ("conflict", "conflict_mode"):
                kwargs["conflict_mode"] = ConflictMode(value.upper())
            elif key == "max_iterations":
                kwargs["max_iterations"] = int(value)
            else:
                raise CliError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise CliError(f"bad config value {item!r}: {exc}") from None
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _timed(spec: str, what: str) -> tuple[str, int]:
    body, sep, ms = spec.rpartition("@")
    if not sep or not body:
        raise CliError(f"{what} must look like <spec>@<ms>, got {spec!r}")
    try:
        t = int(ms)
    except ValueError:
        raise CliError(f"bad time in {spec!r}") from None
    if t < 0:
        raise CliError(f"negative time in {spec!r}")
    return body.strip(), t


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_lint(args) -> int:
    netlist = parse_netlist(Path(args.file).read_text())
    report = validate_netlist(netlist)
    for w in report.warnings:
        print(f"warning: {w}")
    for e in report.errors:
        print(f"error: {e}")
    b = budget(netlist)
    print(f"{args.file}: {b.valves} valves, {b.vents} vents, {b.vias} vias")
    return EXIT_OK if report.ok else EXIT_FAILURE


def cmd_sweep(args) -> int:
    config = parse_config(args.config)
    rows, levels, _ = sweep(hold_ms=args.hold_ms, config=config)
    table = sorted(zip(rows, levels))
    lines = ["b1,b2,b3,p,error"]
    lines += [",".join(str(v) for v in row) + f",{level.bit}" for row, level in table]
    _write(args.output, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_scenario(args) -> int:
    config = parse_config(args.config)
    netlist = parse_netlist(Path(args.netlist).read_text())
    events = parse_scenario(Path(args.file).read_text())
    trace = run_events(netlist, events, config)
    _write(args.output, trace.to_csv())
    error_ports = [p.name for p in netlist.ports if p.role is PortRole.ERROR_OUT]
    flagged = any(
        trace.level(e, name) is VAC for e in trace.checkpoints().values() for name in error_ports
    )
    return EXIT_ERROR_DETECTED if flagged else EXIT_OK


def cmd_ipc(args) -> int:
    config = parse_config(args.config)
    faults = []
    for spec in args.fault or ():
        body, t = _timed(spec, "--fault")
        faults.append((t, parse_fault_spec(body)))
    for spec in args.clear or ():
        body, t = _timed(spec, "--clear")
        faults.append((t, body))
    faults.sort(key=lambda f: f[0])
    run = run_ipc(args.mode, faults, total_ms=args.total_ms, config=config)
    _write(args.output, run.trace.to_csv())
    if args.events:
        Path(args.events).write_text(run.events_csv())
    for e in run.whistle_transitions():
        log.info("t=%d ms whistle %s", e.time_ms, e.value)
    return EXIT_ERROR_DETECTED if run.sounding_times() else EXIT_OK


def cmd_protocol(args) -> int:
    mode = protocol.Mode(args.mode)
    cfg = protocol.PhaseConfig()
    if mode is protocol.Mode.CONTINUOUS:
        steps = [PERISTALTIC_STEPS[i % len(PERISTALTIC_STEPS)] for i in range(args.steps)]
        events = protocol.phase_schedule(steps, cfg, mode)
    else:
        events = protocol.phase_schedule(PERISTALTIC_STEPS, cfg, mode, periods=args.periods)
    _write(args.output, serialize_scenario(events))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pneusim", description="Pneumatic logic simulator and parity detector.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log whistle transitions and progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_opt(p):
        p.add_argument(
            "--config", action="append", metavar="KEY=VALUE",
            help="simulator setting: semantics=CHAMBER_VAC|STRICT_PAPER, "
                 "conflict=VENT_DOMINATES|X_ON_CONFLICT|SUPPLY_DOMINATES, max_iterations=N",
        )

    p = sub.add_parser("lint", help="parse and validate a .pnet netlist")
    p.add_argument("file")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("sweep", help="run all 16 detector rows and write the error table")
    p.add_argument("--hold-ms", type=int, default=15000)
    p.add_argument("-o", "--output")
    config_opt(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scenario", help="replay a .pseq scenario on a netlist")
    p.add_argument("file")
    p.add_argument("--netlist", required=True)
    p.add_argument("-o", "--output")
    config_opt(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("ipc", help="run the compression-device case study")
    p.add_argument("--mode", choices=[m.value for m in protocol.Mode], default="continuous")
    p.add_argument("--fault", action="append", metavar="SPEC@MS", help='e.g. "LEAK bellows2 AS leak2@20000"')
    p.add_argument("--clear", action="append", metavar="ID@MS")
    p.add_argument("--total-ms", type=int, default=123000)
    p.add_argument("-o", "--output")
    p.add_argument("--events", help="write whistle transitions and checkpoints as CSV")
    config_opt(p)
    p.set_defaults(func=cmd_ipc)

    p = sub.add_parser("protocol", help="emit a controller schedule as a .pseq file")
    p.add_argument("--mode", choices=[m.value for m in protocol.Mode], default="continuous")
    p.add_argument("--steps", type=int, default=3, help="continuous mode: number of plant steps")
    p.add_argument("--periods", type=int, default=1, help="phased mode: number of run/check periods")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_protocol)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except RunError as exc:
        print(f"pneusim: simulation failed: {exc}", file=sys.stderr)
    except ParseError as exc:
        print(f"pneusim: {exc}", file=sys.stderr)
    except (CliError, NetlistError, FaultError, SimulationError, ValueError, OSError) as exc:
        print(f"pneusim: {exc}", file=sys.stderr)
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
