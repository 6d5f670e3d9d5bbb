"""Fault models applied between settles.

LEAK attaches an atmospheric source to a net (a punctured bellows).  CUT
severs a net: the far side, which carries the listed distal ports and
every valve terminal on the net, moves to a fresh vented net while the
remaining ports (normally the solenoid) stay on the original.  STUCK_VALVE
and STUCK_BIT pin a valve or a port drive.

Active faults are recorded on the netlist so that ``clear`` can undo
exactly what ``inject`` did.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .netlist import ATM, VAC, X, Netlist, NetlistError, Port, PressureState, Valve, ports_on


class FaultError(ValueError):
    pass


class FaultKind(Enum):
    LEAK = "LEAK"
    CUT = "CUT"
    STUCK_VALVE = "STUCK_VALVE"
    STUCK_BIT = "STUCK_BIT"


class Detectability(Enum):
    DETECTABLE = "DETECTABLE"
    UNDETECTABLE = "UNDETECTABLE"


@dataclass(frozen=True)
class Fault:
    id: str
    kind: FaultKind
    target: str
    distal_ports: tuple[str, ...] = ()
    # STUCK_VALVE: "OPEN" or "CLOSED"; STUCK_BIT: the pinned level
    setting: str | PressureState | None = None

    @classmethod
    def leak(cls, target: str, id: str) -> "Fault":
        return cls(id, FaultKind.LEAK, target)

    @classmethod
    def cut(cls, target: str, id: str, distal_ports=()) -> "Fault":
        return cls(id, FaultKind.CUT, target, tuple(distal_ports))

    @classmethod
    def stuck_valve(cls, valve: str, open_: bool, id: str) -> "Fault":
        return cls(id, FaultKind.STUCK_VALVE, valve, setting="OPEN" if open_ else "CLOSED")

    @classmethod
    def stuck_bit(cls, port: str, level: PressureState, id: str) -> "Fault":
        return cls(id, FaultKind.STUCK_BIT, port, setting=level)


@dataclass(frozen=True)
class _Applied:
    fault: Fault
    net: str | None = None
    added_vent: bool = False
    fresh_net: str | None = None
    moved_ports: tuple[str, ...] = ()
    moved_terminals: tuple[tuple[str, int], ...] = ()


def _resolve_net(netlist: Netlist, target: str) -> str:
    """A fault target may name a net or a port on that net."""
    if netlist.has_net(target):
        return target
    for p in netlist.ports:
        if p.name == target:
            return p.net
    raise FaultError(f"unknown fault target {target!r}")


def active_faults(netlist: Netlist) -> list[Fault]:
    return [a.fault for a in netlist.faults]


def stuck_valves(netlist: Netlist) -> dict:
    from .engine import Conduction

    out = {}
    for a in netlist.faults:
        if a.fault.kind is FaultKind.STUCK_VALVE:
            out[a.fault.target] = Conduction.OPEN if a.fault.setting == "OPEN" else Conduction.CLOSED
    return out


def stuck_bits(netlist: Netlist) -> dict[str, PressureState]:
    return {a.fault.target: a.fault.setting for a in netlist.faults if a.fault.kind is FaultKind.STUCK_BIT}


def inject(netlist: Netlist, state, fault: Fault):
    """Apply ``fault``; returns the new (netlist, state) pair."""
    if any(a.fault.id == fault.id for a in netlist.faults):
        raise FaultError(f"fault id {fault.id!r} already active")
    pressure = dict(state.pressure)

    if fault.kind is FaultKind.LEAK:
        net = _resolve_net(netlist, fault.target)
        added = net not in netlist.vents
        applied = _Applied(fault, net=net, added_vent=added)
        new = netlist.replace(vents=netlist.vents | {net})

    elif fault.kind is FaultKind.CUT:
        net = _resolve_net(netlist, fault.target)
        on_net = {p.name for p in ports_on(netlist, net)}
        unknown = [p for p in fault.distal_ports if p not in on_net]
        if unknown:
            raise FaultError(f"distal ports {unknown} are not on net {net!r}")
        fresh = f"{net}~{fault.id}"
        if netlist.has_net(fresh):
            raise FaultError(f"net {fresh!r} already exists")
        terminals = []
        valves = []
        for v in netlist.valves:
            nets = list(v.nets)
            for slot, n in enumerate(nets):
                if n == net:
                    nets[slot] = fresh
                    terminals.append((v.name, slot))
            valves.append(Valve(v.name, *nets))
        moved = set(fault.distal_ports)
        ports = tuple(Port(p.name, fresh, p.role) if p.name in moved else p for p in netlist.ports)
        applied = _Applied(
            fault, net=net, fresh_net=fresh,
            moved_ports=tuple(sorted(moved)), moved_terminals=tuple(terminals),
        )
        new = netlist.replace(
            nets=netlist.nets + (fresh,), valves=tuple(valves), ports=ports,
            vents=netlist.vents | {fresh},
        )
        # a fresh break admits atmosphere
        pressure[fresh] = ATM

    elif fault.kind is FaultKind.STUCK_VALVE:
        try:
            netlist.valve(fault.target)
        except NetlistError as exc:
            raise FaultError(str(exc)) from None
        if fault.setting not in ("OPEN", "CLOSED"):
            raise FaultError("STUCK_VALVE needs OPEN or CLOSED")
        applied = _Applied(fault)
        new = netlist

    elif fault.kind is FaultKind.STUCK_BIT:
        try:
            port = netlist.port(fault.target)
        except NetlistError as exc:
            raise FaultError(str(exc)) from None
        if not port.drivable:
            raise FaultError(f"port {port.name!r} is not an input")
        if fault.setting not in (ATM, VAC):
            raise FaultError("STUCK_BIT needs VAC or ATM")
        applied = _Applied(fault)
        new = netlist

    else:  # pragma: no cover
        raise FaultError(f"unsupported fault kind {fault.kind}")

    new = new.replace(faults=netlist.faults + (applied,))
    return new, type(state)(pressure, dict(state.valve_open))


def clear(netlist: Netlist, state, fault_id: str):
    """Undo the active fault ``fault_id``."""
    match = [a for a in netlist.faults if a.fault.id == fault_id]
    if not match:
        raise FaultError(f"no active fault {fault_id!r}")
    applied = match[0]
    remaining = tuple(a for a in netlist.faults if a.fault.id != fault_id)
    pressure = dict(state.pressure)
    kind = applied.fault.kind
    new = netlist

    if kind is FaultKind.LEAK:
        still_leaking = any(a.fault.kind is FaultKind.LEAK and a.net == applied.net for a in remaining)
        if applied.added_vent and not still_leaking:
            new = netlist.replace(vents=netlist.vents - {applied.net})
        elif applied.added_vent:
            # hand vent ownership to the first other leak on this net
            heir = next(a for a in remaining if a.fault.kind is FaultKind.LEAK and a.net == applied.net)
            remaining = tuple(_Applied(a.fault, a.net, True) if a is heir else a for a in remaining)

    elif kind is FaultKind.CUT:
        net, fresh = applied.net, applied.fresh_net
        terminals = {}
        for name, slot in applied.moved_terminals:
            terminals.setdefault(name, []).append(slot)
        valves = []
        for v in netlist.valves:
            nets = list(v.nets)
            for slot in terminals.get(v.name, ()):
                nets[slot] = net
            valves.append(Valve(v.name, *nets))
        moved = set(applied.moved_ports)
        ports = tuple(Port(p.name, net, p.role) if p.name in moved else p for p in netlist.ports)
        new = netlist.replace(
            nets=tuple(n for n in netlist.nets if n != fresh), valves=tuple(valves), ports=ports,
            vents=netlist.vents - {fresh},
        )
        a, b = pressure.pop(fresh, ATM), pressure.get(net, ATM)
        pressure[net] = a if a is b else X

    new = new.replace(faults=remaining)
    return new, type(state)(pressure, dict(state.valve_open))


def detectability(base_bits, flipped_positions) -> Detectability:
    """Whether a parity check notices the given flipped bits (1-based positions)."""
    n = len(base_bits)
    for pos in flipped_positions:
        if not 1 <= pos <= n:
            raise ValueError(f"bit position {pos} out of range for {n} bits")
    return Detectability.DETECTABLE if len(set(flipped_positions)) % 2 else Detectability.UNDETECTABLE
