"""Line-oriented text formats.

Netlists (``.pnet``)::

    NET <name>
    VALVE <name> CHAMBER <net> SIDES <net> <net>
    VENT <net>
    PORT <name> <net> ROLE <role>
    VIA <netA> <netB>

Scenarios (``.pseq``)::

    AT <ms> SET <port> VAC|ATM
    AT <ms> FAULT LEAK <target> AS <id>
    AT <ms> FAULT CUT <target> [DISTAL <port>...] AS <id>
    AT <ms> FAULT STUCK_VALVE <valve> OPEN|CLOSED AS <id>
    AT <ms> FAULT STUCK_BIT <port> VAC|ATM AS <id>
    AT <ms> CLEAR <id>
    AT <ms> CHECKPOINT <label>

``#`` starts a comment.  Nets must be declared before use.  A ``VIA``
whose second net is declared merges it into the first; otherwise the
line only records a merge that already happened, which is what the
serializer emits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .faults import Fault, FaultKind
from .netlist import ATM, VAC, Netlist, NetlistError, Port, PortRole, PressureState, Valve, merge_via

NETLIST_HEADER = "# pneusim netlist v1"
SCENARIO_HEADER = "# pneusim scenario v1"

_NAME = re.compile(r"[A-Za-z0-9_.~\-]+\Z")
_LEVELS = {"VAC": VAC, "ATM": ATM}


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


class EventKind(Enum):
    SET = "SET"
    FAULT = "FAULT"
    CLEAR = "CLEAR"
    CHECKPOINT = "CHECKPOINT"


@dataclass(frozen=True)
class ScenarioEvent:
    time_ms: int
    kind: EventKind
    port: str | None = None
    level: PressureState | None = None
    fault: Fault | None = None
    fault_id: str | None = None
    label: str | None = None

    @classmethod
    def set(cls, t: int, port: str, level: PressureState) -> "ScenarioEvent":
        return cls(t, EventKind.SET, port=port, level=level)

    @classmethod
    def inject(cls, t: int, fault: Fault) -> "ScenarioEvent":
        return cls(t, EventKind.FAULT, fault=fault)

    @classmethod
    def clear(cls, t: int, fault_id: str) -> "ScenarioEvent":
        return cls(t, EventKind.CLEAR, fault_id=fault_id)

    @classmethod
    def checkpoint(cls, t: int, label: str) -> "ScenarioEvent":
        return cls(t, EventKind.CHECKPOINT, label=label)

    def shifted(self, dt: int) -> "ScenarioEvent":
        return ScenarioEvent(self.time_ms + dt, self.kind, self.port, self.level, self.fault, self.fault_id, self.label)


def _tokenize(text: str):
    """Yield (line_no, [(column, token), ...]) for non-blank lines."""
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0]
        tokens = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", line)]
        if tokens:
            yield lineno, tokens


def _name(tok, lineno: int, what: str) -> str:
    col, value = tok
    if not _NAME.match(value):
        raise ParseError(f"invalid {what} name {value!r}", SourceSpan(lineno, col))
    return value


def _arity(tokens, n: int, lineno: int, form: str) -> None:
    if len(tokens) != n:
        col = tokens[-1][0] if len(tokens) < n else tokens[n][0]
        raise ParseError(f"expected `{form}`", SourceSpan(lineno, col))


def _keyword(tok, expected: str, lineno: int) -> None:
    if tok[1] != expected:
        raise ParseError(f"expected {expected}, got {tok[1]!r}", SourceSpan(lineno, tok[0]))


def parse_netlist(text: str) -> Netlist:
    nets: list[str] = []
    declared: set[str] = set()
    valves: dict[str, Valve] = {}
    vents: set[str] = set()
    ports: dict[str, Port] = {}
    vias: list[tuple[tuple[str, str], SourceSpan, bool]] = []

    def net_ref(tok, lineno):
        name = _name(tok, lineno, "net")
        if name not in declared:
            raise ParseError(f"undeclared net {name!r}", SourceSpan(lineno, tok[0]))
        return name

    for lineno, tokens in _tokenize(text):
        col, kw = tokens[0]
        if kw == "NET":
            _arity(tokens, 2, lineno, "NET <name>")
            name = _name(tokens[1], lineno, "net")
            if name in declared:
                raise ParseError(f"duplicate net {name!r}", SourceSpan(lineno, tokens[1][0]))
            declared.add(name)
            nets.append(name)
        elif kw == "VALVE":
            _arity(tokens, 7, lineno, "VALVE <name> CHAMBER <net> SIDES <net> <net>")
            name = _name(tokens[1], lineno, "valve")
            if name in valves:
                raise ParseError(f"duplicate valve {name!r}", SourceSpan(lineno, tokens[1][0]))
            _keyword(tokens[2], "CHAMBER", lineno)
            _keyword(tokens[4], "SIDES", lineno)
            chamber, s1, s2 = (net_ref(tokens[i], lineno) for i in (3, 5, 6))
            if chamber in (s1, s2):
                raise ParseError(f"valve {name!r} chamber is also a channel side", SourceSpan(lineno, tokens[3][0]))
            valves[name] = Valve(name, chamber, s1, s2)
        elif kw == "VENT":
            _arity(tokens, 2, lineno, "VENT <net>")
            name = net_ref(tokens[1], lineno)
            if name in vents:
                raise ParseError(f"duplicate vent on {name!r}", SourceSpan(lineno, tokens[1][0]))
            vents.add(name)
        elif kw == "PORT":
            _arity(tokens, 5, lineno, "PORT <name> <net> ROLE <role>")
            name = _name(tokens[1], lineno, "port")
            if name in ports:
                raise ParseError(f"duplicate port {name!r}", SourceSpan(lineno, tokens[1][0]))
            net = net_ref(tokens[2], lineno)
            _keyword(tokens[3], "ROLE", lineno)
            try:
                role = PortRole(tokens[4][1])
            except ValueError:
                raise ParseError(f"malformed role {tokens[4][1]!r}", SourceSpan(lineno, tokens[4][0])) from None
            ports[name] = Port(name, net, role)
        elif kw == "VIA":
            _arity(tokens, 3, lineno, "VIA <netA> <netB>")
            a = net_ref(tokens[1], lineno)
            b = _name(tokens[2], lineno, "net")
            if a == b:
                raise ParseError(f"via merges net {a!r} with itself", SourceSpan(lineno, tokens[2][0]))
            vias.append(((a, b), SourceSpan(lineno, tokens[2][0]), b in declared))
        else:
            raise ParseError(f"unknown keyword {kw!r}", SourceSpan(lineno, col))

    netlist = Netlist(tuple(nets), tuple(valves.values()), frozenset(vents), tuple(ports.values()))
    for (a, b), span, live in vias:
        if live:
            try:
                netlist = merge_via(netlist, a, b)
            except NetlistError as exc:
                raise ParseError(str(exc), span) from None
        else:
            netlist = netlist.replace(via_merges=netlist.via_merges + ((a, b),))
    _check_power_vents(netlist)
    return netlist


def _check_power_vents(netlist: Netlist) -> None:
    for p in netlist.ports:
        if p.role is PortRole.POWER_VAC and p.net in netlist.vents:
            raise ParseError(f"power port {p.name!r} sits on vented net {p.net!r}", SourceSpan(1, 1))


def serialize_netlist(netlist: Netlist) -> str:
    n = netlist.canonical()
    lines = [NETLIST_HEADER]
    lines += [f"NET {x}" for x in n.nets]
    lines += [f"VENT {x}" for x in sorted(n.vents)]
    lines += [f"VALVE {v.name} CHAMBER {v.chamber} SIDES {v.side1} {v.side2}" for v in n.valves]
    lines += [f"PORT {p.name} {p.net} ROLE {p.role.value}" for p in n.ports]
    lines += [f"VIA {a} {b}" for a, b in n.via_merges]
    return "\n".join(lines) + "\n"


def _parse_fault(tokens, lineno: int) -> Fault:
    if len(tokens) < 4:
        raise ParseError("incomplete fault spec", SourceSpan(lineno, tokens[-1][0] if tokens else 1))
    if tokens[-2][1] != "AS":
        raise ParseError("fault spec must end with `AS <id>`", SourceSpan(lineno, tokens[-2][0]))
    fid = _name(tokens[-1], lineno, "fault id")
    kind_tok, body = tokens[0], tokens[1:-2]
    try:
        kind = FaultKind(kind_tok[1])
    except ValueError:
        raise ParseError(f"unknown fault kind {kind_tok[1]!r}", SourceSpan(lineno, kind_tok[0])) from None
    if not body:
        raise ParseError("fault spec lacks a target", SourceSpan(lineno, kind_tok[0]))
    target = _name(body[0], lineno, "fault target")
    rest = body[1:]
    if kind is FaultKind.LEAK:
        if rest:
            raise ParseError("LEAK takes one target", SourceSpan(lineno, rest[0][0]))
        return Fault.leak(target, fid)
    if kind is FaultKind.CUT:
        distal: list[str] = []
        if rest:
            _keyword(rest[0], "DISTAL", lineno)
            distal = [_name(t, lineno, "port") for t in rest[1:]]
        return Fault.cut(target, fid, distal)
    if len(rest) != 1:
        col = rest[1][0] if len(rest) > 1 else body[0][0]
        raise ParseError(f"{kind.value} takes a target and one setting", SourceSpan(lineno, col))
    setting = rest[0]
    if kind is FaultKind.STUCK_VALVE:
        if setting[1] not in ("OPEN", "CLOSED"):
            raise ParseError(f"expected OPEN or CLOSED, got {setting[1]!r}", SourceSpan(lineno, setting[0]))
        return Fault.stuck_valve(target, setting[1] == "OPEN", fid)
    if setting[1] not in _LEVELS:
        raise ParseError(f"malformed level {setting[1]!r}", SourceSpan(lineno, setting[0]))
    return Fault.stuck_bit(target, _LEVELS[setting[1]], fid)


def parse_fault_spec(text: str) -> Fault:
    """Parse the part of a FAULT line after the keyword, e.g. ``LEAK bellows2 AS f1``."""
    tokens = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", text)]
    return _parse_fault(tokens, 1)


def parse_scenario(text: str) -> list[ScenarioEvent]:
    events: list[ScenarioEvent] = []
    for lineno, tokens in _tokenize(text):
        if tokens[0][1] != "AT":
            raise ParseError(f"unknown keyword {tokens[0][1]!r}", SourceSpan(lineno, tokens[0][0]))
        if len(tokens) < 3:
            raise ParseError("expected `AT <ms> <action> ...`", SourceSpan(lineno, tokens[-1][0]))
        tcol, traw = tokens[1]
        if traw.startswith("-") and traw[1:].isdigit():
            raise ParseError("negative time", SourceSpan(lineno, tcol))
        if not traw.isdigit() or not traw.isascii():
            raise ParseError(f"malformed time {traw!r}", SourceSpan(lineno, tcol))
        t = int(traw)
        acol, action = tokens[2]
        args = tokens[3:]
        if action == "SET":
            _arity(tokens, 5, lineno, "AT <ms> SET <port> VAC|ATM")
            port = _name(args[0], lineno, "port")
            if args[1][1] not in _LEVELS:
                raise ParseError(f"malformed level {args[1][1]!r}", SourceSpan(lineno, args[1][0]))
            events.append(ScenarioEvent.set(t, port, _LEVELS[args[1][1]]))
        elif action == "FAULT":
            events.append(ScenarioEvent.inject(t, _parse_fault(args, lineno) if args else _parse_fault([tokens[2]], lineno)))
        elif action == "CLEAR":
            _arity(tokens, 4, lineno, "AT <ms> CLEAR <id>")
            events.append(ScenarioEvent.clear(t, _name(args[0], lineno, "fault id")))
        elif action == "CHECKPOINT":
            _arity(tokens, 4, lineno, "AT <ms> CHECKPOINT <label>")
            events.append(ScenarioEvent.checkpoint(t, _name(args[0], lineno, "label")))
        else:
            raise ParseError(f"unknown action {action!r}", SourceSpan(lineno, acol))
    # sorted() is stable, so equal timestamps keep file order
    return sorted(events, key=lambda e: e.time_ms)


def format_fault(fault: Fault) -> str:
    if fault.kind is FaultKind.LEAK:
        body = f"LEAK {fault.target}"
    elif fault.kind is FaultKind.CUT:
        body = f"CUT {fault.target}" + (" DISTAL " + " ".join(fault.distal_ports) if fault.distal_ports else "")
    elif fault.kind is FaultKind.STUCK_VALVE:
        body = f"STUCK_VALVE {fault.target} {fault.setting}"
    else:
        body = f"STUCK_BIT {fault.target} {fault.setting.value}"
    return f"{body} AS {fault.id}"


def serialize_scenario(events) -> str:
    lines = [SCENARIO_HEADER]
    for e in sorted(events, key=lambda e: e.time_ms):
        if e.kind is EventKind.SET:
            lines.append(f"AT {e.time_ms} SET {e.port} {e.level.value}")
        elif e.kind is EventKind.FAULT:
            lines.append(f"AT {e.time_ms} FAULT {format_fault(e.fault)}")
        elif e.kind is EventKind.CLEAR:
            lines.append(f"AT {e.time_ms} CLEAR {e.fault_id}")
        else:
            lines.append(f"AT {e.time_ms} CHECKPOINT {e.label}")
    return "\n".join(lines) + "\n"
