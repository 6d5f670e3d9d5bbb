"""Switch-level settling of net pressures.

Each settle step computes every valve's conduction from the current net
pressures, groups nets into components joined by open valves, and gives
each component one pressure from its sources (vents, driven ports) or,
when it has none, from the charge its members hold in the current step:
a region cut off from every source keeps its pressure (latched), and a
region joining unequal charges becomes X.  Valves in
state X are handled by evaluating the step twice, once with X valves
closed and once with them open; nets whose value differs become X.

Steps repeat synchronously until the state stops changing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .netlist import ATM, VAC, X, Netlist, PressureState, Valve

VACUUM_LEVEL_KPA = -68


class Conduction(Enum):
    OPEN = "OPEN"
    CLOSED = "CLOSED"
    X = "X"


class ConductionSemantics(Enum):
    CHAMBER_VAC = "CHAMBER_VAC"
    STRICT_PAPER = "STRICT_PAPER"


class ConflictMode(Enum):
    X_ON_CONFLICT = "X_ON_CONFLICT"
    VENT_DOMINATES = "VENT_DOMINATES"
    SUPPLY_DOMINATES = "SUPPLY_DOMINATES"


class OscillationError(RuntimeError):
    def __init__(self, message: str, cycle: Sequence[Mapping[str, PressureState]] = ()):
        super().__init__(message)
        self.cycle = list(cycle)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    conduction_semantics: ConductionSemantics = ConductionSemantics.CHAMBER_VAC
    conflict_mode: ConflictMode = ConflictMode.VENT_DOMINATES
    max_iterations: int | None = None

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def iteration_limit(self, netlist: Netlist) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return 4 * len(netlist.nets) + 8

    def describe(self) -> str:
        return f"{self.conduction_semantics.value}/{self.conflict_mode.value}"


@dataclass
class SimState:
    pressure: dict[str, PressureState]
    valve_open: dict[str, Conduction] = field(default_factory=dict)

    def __getitem__(self, net: str) -> PressureState:
        return self.pressure[net]

    def copy(self) -> "SimState":
        return SimState(dict(self.pressure), dict(self.valve_open))


def _conduction_definite(chamber, side1, side2, semantics) -> Conduction:
    if chamber is ATM:
        return Conduction.CLOSED
    if semantics is ConductionSemantics.STRICT_PAPER and side1 is VAC and side2 is VAC:
        return Conduction.CLOSED
    return Conduction.OPEN


def conduction(
    chamber: PressureState,
    side1: PressureState,
    side2: PressureState,
    semantics: ConductionSemantics = ConductionSemantics.CHAMBER_VAC,
) -> Conduction:
    """Valve state for the given chamber and channel pressures.

    An X input is replaced by both ATM and VAC; if every substitution
    gives the same answer that answer stands, otherwise the valve is X.
    """
    options = [(ATM, VAC) if p is X else (p,) for p in (chamber, side1, side2)]
    outcomes = {
        _conduction_definite(c, s1, s2, semantics)
        for c in options[0]
        for s1 in options[1]
        for s2 in options[2]
    }
    if len(outcomes) == 1:
        return outcomes.pop()
    return Conduction.X


def resolve_component(
    members: Iterable[str],
    prev: Mapping[str, PressureState],
    has_atm_source: bool,
    has_vac_source: bool,
    mode: ConflictMode = ConflictMode.VENT_DOMINATES,
) -> PressureState:
    if has_atm_source and has_vac_source:
        if mode is ConflictMode.VENT_DOMINATES:
            return ATM
        if mode is ConflictMode.SUPPLY_DOMINATES:
            return VAC
        return X
    if has_atm_source:
        return ATM
    if has_vac_source:
        return VAC
    stored = {prev[m] for m in members}
    if len(stored) == 1:
        return stored.pop()
    return X


class _DSU:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller index wins so grouping never depends on call order
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


class _Compiled:
    """Index-based view of a netlist plus the sources active for one settle."""

    def __init__(self, netlist: Netlist, sources: Mapping[str, set[PressureState]], stuck: Mapping[str, Conduction]):
        self.names = list(netlist.nets)
        self.index = {n: i for i, n in enumerate(self.names)}
        self.valves = [
            (v.name, self.index[v.chamber], self.index[v.side1], self.index[v.side2]) for v in netlist.valves
        ]
        self.stuck = [stuck.get(v.name) for v in netlist.valves]
        n = len(self.names)
        self.atm_src = [False] * n
        self.vac_src = [False] * n
        for net, levels in sources.items():
            i = self.index[net]
            self.atm_src[i] = ATM in levels
            self.vac_src[i] = VAC in levels


def _valve_states(c: _Compiled, state: Sequence[PressureState], semantics) -> list[Conduction]:
    out = []
    for (_, ch, s1, s2), stuck in zip(c.valves, c.stuck):
        out.append(stuck if stuck is not None else conduction(state[ch], state[s1], state[s2], semantics))
    return out


def _resolve(c: _Compiled, conducting: list[bool], prev: Sequence[PressureState], mode) -> list[PressureState]:
    n = len(c.names)
    dsu = _DSU(n)
    for (_, _, s1, s2), on in zip(c.valves, conducting):
        if on:
            dsu.union(s1, s2)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(dsu.find(i), []).append(i)
    result: list[PressureState] = [ATM] * n
    for members in groups.values():
        atm = any(c.atm_src[i] for i in members)
        vac = any(c.vac_src[i] for i in members)
        if atm or vac:
            level = resolve_component((), {}, atm, vac, mode)
        else:
            level = resolve_component(members, prev, False, False, mode)
        for i in members:
            result[i] = level
    return result


def _step(c: _Compiled, state, config: SimConfig) -> tuple[list[PressureState], list[Conduction]]:
    valves = _valve_states(c, state, config.conduction_semantics)
    lo = _resolve(c, [v is Conduction.OPEN for v in valves], state, config.conflict_mode)
    if not any(v is Conduction.X for v in valves):
        return lo, valves
    hi = _resolve(c, [v is not Conduction.CLOSED for v in valves], state, config.conflict_mode)
    return [a if a is b else X for a, b in zip(lo, hi)], valves


def effective_drives(netlist: Netlist, drives: Mapping[str, PressureState]) -> dict[str, PressureState]:
    """Level on every drivable port: explicit drive, stuck-bit override, else ATM."""
    from .faults import stuck_bits

    known = {p.name: p for p in netlist.ports}
    for name, level in drives.items():
        port = known.get(name)
        if port is None:
            raise SimulationError(f"drive on unknown port {name!r}")
        if not port.drivable:
            raise SimulationError(f"port {name!r} ({port.role.value}) cannot be driven")
        if level not in (ATM, VAC):
            raise SimulationError(f"port {name!r} can only be driven to ATM or VAC")
    levels = {p.name: drives.get(p.name, ATM) for p in netlist.ports if p.drivable}
    levels.update(stuck_bits(netlist))
    return levels


def _sources(netlist: Netlist, drives: Mapping[str, PressureState]) -> dict[str, set[PressureState]]:
    sources: dict[str, set[PressureState]] = {}
    for net in netlist.vents:
        sources.setdefault(net, set()).add(ATM)
    levels = effective_drives(netlist, drives)
    for p in netlist.ports:
        if p.name in levels:
            sources.setdefault(p.net, set()).add(levels[p.name])
    return sources


def initial_state(netlist: Netlist) -> SimState:
    pressure = {n: ATM for n in netlist.nets}
    return SimState(pressure, {v.name: Conduction.CLOSED for v in netlist.valves})


def settle(
    netlist: Netlist,
    prev: SimState,
    drives: Mapping[str, PressureState],
    config: SimConfig = SimConfig(),
) -> SimState:
    """Iterate to the fixed point reached from ``prev`` under ``drives``.

    Raises OscillationError when the iteration revisits a state or runs
    past the configured limit.
    """
    from .faults import stuck_valves

    missing = [n for n in netlist.nets if n not in prev.pressure]
    if missing:
        raise SimulationError(f"previous state lacks nets {missing[:5]}")
    c = _Compiled(netlist, _sources(netlist, drives), stuck_valves(netlist))
    state = [prev.pressure[n] for n in c.names]
    for i, name in enumerate(c.names):
        if c.atm_src[i] != c.vac_src[i]:
            state[i] = VAC if c.vac_src[i] else ATM

    seen = {tuple(state): 0}
    history = [state]
    for _ in range(config.iteration_limit(netlist)):
        new, valves = _step(c, state, config)
        if new == state:
            return SimState(
                dict(zip(c.names, new)),
                {v[0]: s for v, s in zip(c.valves, valves)},
            )
        key = tuple(new)
        if key in seen:
            cycle = history[seen[key]:]
            raise OscillationError(
                f"settle oscillates with period {len(cycle)}",
                [dict(zip(c.names, s)) for s in cycle],
            )
        seen[key] = len(history)
        history.append(new)
        state = new
    raise OscillationError(
        f"no fixed point within {config.iteration_limit(netlist)} iterations",
        [dict(zip(c.names, s)) for s in history[-4:]],
    )


@dataclass
class TraceEntry:
    time_ms: int
    state: SimState
    event: object = None
    label: str | None = None
    diagnostics: str = ""


@dataclass
class Trace:
    netlist: Netlist
    entries: list[TraceEntry] = field(default_factory=list)
    config: SimConfig = SimConfig()
    vacuum_level_kPa: int = VACUUM_LEVEL_KPA

    def checkpoints(self) -> dict[str, TraceEntry]:
        return {e.label: e for e in self.entries if e.label is not None}

    def level(self, entry: TraceEntry, port_or_net: str) -> PressureState:
        if port_or_net in entry.state.pressure:
            return entry.state.pressure[port_or_net]
        return entry.state.pressure[self.netlist.port(port_or_net).net]

    def to_csv(self) -> str:
        # sorted columns keep the export independent of declaration order
        nets = sorted(self.netlist.nets)
        ports = sorted(self.netlist.ports, key=lambda p: p.name)
        lines = [",".join(["time_ms", *nets, *(p.name for p in ports)])]
        for e in self.entries:
            p = e.state.pressure
            row = [str(e.time_ms)]
            row += [p[n].bit if n in p else "X" for n in nets]
            row += [p[pt.net].bit if pt.net in p else "X" for pt in ports]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


class RunError(SimulationError):
    def __init__(self, message: str, trace: Trace | None = None):
        super().__init__(message)
        self.trace = trace


def run_events(
    netlist: Netlist,
    scenario: Sequence,
    config: SimConfig = SimConfig(),
    state: SimState | None = None,
) -> Trace:
    """Replay a scenario from an all-atmosphere start.

    One trace entry is appended per event; the first entry is the settled
    initial state at t=0.  The trace header lists the nets of the netlist
    as given, so nets created by faults are not exported.
    """
    from .dsl import EventKind
    from .faults import clear, inject

    trace = Trace(netlist, config=config)
    current = netlist
    drives: dict[str, PressureState] = {}
    state = state or initial_state(netlist)
    try:
        state = settle(current, state, drives, config)
    except OscillationError as exc:
        raise RunError(f"initial state: {exc}", trace) from exc
    trace.entries.append(TraceEntry(0, state, None, None))

    for ev in sorted(scenario, key=lambda e: e.time_ms):
        label = None
        try:
            if ev.kind is EventKind.SET:
                port = next((p for p in current.ports if p.name == ev.port), None)
                if port is None:
                    raise RunError(f"t={ev.time_ms}: scenario drives undeclared port {ev.port!r}", trace)
                if not port.drivable:
                    raise RunError(f"t={ev.time_ms}: port {ev.port!r} is an output", trace)
                drives[ev.port] = ev.level
            elif ev.kind is EventKind.FAULT:
                current, state = inject(current, state, ev.fault)
            elif ev.kind is EventKind.CLEAR:
                current, state = clear(current, state, ev.fault_id)
            elif ev.kind is EventKind.CHECKPOINT:
                label = ev.label
            state = settle(current, state, drives, config)
        except OscillationError as exc:
            raise RunError(f"t={ev.time_ms}: {exc}", trace) from exc
        except (ValueError, KeyError) as exc:
            raise RunError(f"t={ev.time_ms}: {exc}", trace) from exc
        trace.entries.append(TraceEntry(ev.time_ms, state, ev, label))
    return trace
