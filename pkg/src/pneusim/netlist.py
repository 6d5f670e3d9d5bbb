"""Structural model of a membrane-valve pneumatic circuit.

A circuit is a set of named nets (connected channel regions), valves that
join two nets when their chamber net holds vacuum, vents (permanent
atmospheric sources) and ports (external connections).  Vias are recorded
net merges and carry no simulation meaning.

Net names double as net identifiers.  Everything here is immutable;
operations that change a netlist return a new one.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple


class NetlistError(ValueError):
    pass


class PressureState(Enum):
    """Discrete pressure of a net: vacuum is logic 1, atmosphere is logic 0."""

    ATM = "ATM"
    VAC = "VAC"
    X = "X"

    @property
    def bit(self) -> str:
        return _BIT[self]

    @classmethod
    def from_bit(cls, value) -> "PressureState":
        return {0: cls.ATM, 1: cls.VAC, "0": cls.ATM, "1": cls.VAC, "X": cls.X}[value]

    def __lt__(self, other):
        # physical order: vacuum is the lower pressure; X has no place in it
        if not isinstance(other, PressureState):
            return NotImplemented
        if self is PressureState.X or other is PressureState.X:
            raise TypeError("X is unordered against ATM and VAC")
        return self is PressureState.VAC and other is PressureState.ATM


ATM = PressureState.ATM
VAC = PressureState.VAC
X = PressureState.X

_BIT = {ATM: "0", VAC: "1", X: "X"}


class PortRole(Enum):
    CONTROL_BIT = "CONTROL_BIT"
    EXPECTED_PARITY = "EXPECTED_PARITY"
    POWER_VAC = "POWER_VAC"
    RESET = "RESET"
    ERROR_OUT = "ERROR_OUT"
    GENERIC_IN = "GENERIC_IN"
    GENERIC_OUT = "GENERIC_OUT"

    @property
    def drivable(self) -> bool:
        return self not in (PortRole.ERROR_OUT, PortRole.GENERIC_OUT)


@dataclass(frozen=True)
class Valve:
    name: str
    chamber: str
    side1: str
    side2: str

    @property
    def nets(self) -> tuple[str, str, str]:
        return (self.chamber, self.side1, self.side2)


@dataclass(frozen=True)
class Port:
    name: str
    net: str
    role: PortRole

    @property
    def drivable(self) -> bool:
        return self.role.drivable


@dataclass(frozen=True)
class Netlist:
    nets: tuple[str, ...] = ()
    valves: tuple[Valve, ...] = ()
    vents: frozenset[str] = frozenset()
    ports: tuple[Port, ...] = ()
    via_merges: tuple[tuple[str, str], ...] = ()
    # active fault records, see pneusim.faults
    faults: tuple = field(default=(), compare=False)

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise NetlistError(f"unknown port {name!r}")

    def valve(self, name: str) -> Valve:
        for v in self.valves:
            if v.name == name:
                return v
        raise NetlistError(f"unknown valve {name!r}")

    def has_net(self, name: str) -> bool:
        return name in self._net_set

    @property
    def _net_set(self) -> frozenset[str]:
        # cached lazily; the dataclass is frozen so bypass __setattr__
        cached = self.__dict__.get("_nets_cache")
        if cached is None:
            cached = frozenset(self.nets)
            object.__setattr__(self, "_nets_cache", cached)
        return cached

    def replace(self, **changes) -> "Netlist":
        return dataclasses.replace(self, **changes)

    def canonical(self) -> "Netlist":
        """Same circuit with every collection in sorted order."""
        return Netlist(
            nets=tuple(sorted(self.nets)),
            valves=tuple(sorted(self.valves, key=lambda v: v.name)),
            vents=frozenset(self.vents),
            ports=tuple(sorted(self.ports, key=lambda p: p.name)),
            via_merges=tuple(sorted(self.via_merges)),
            faults=self.faults,
        )


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


class Budget(NamedTuple):
    valves: int
    vents: int
    vias: int


def validate_netlist(netlist: Netlist) -> ValidationReport:
    errors: list[str] = []
    warnings: list[str] = []
    nets = netlist.nets

    seen: set[str] = set()
    for n in nets:
        if n in seen:
            errors.append(f"duplicate net {n!r}")
        seen.add(n)

    def check_ref(net: str, what: str) -> None:
        if net not in seen:
            errors.append(f"unknown net {net!r} referenced by {what}")

    valve_names: set[str] = set()
    for v in netlist.valves:
        if v.name in valve_names:
            errors.append(f"duplicate valve {v.name!r}")
        valve_names.add(v.name)
        for net in v.nets:
            check_ref(net, f"valve {v.name}")
        if v.chamber in (v.side1, v.side2):
            errors.append(f"valve {v.name}: chamber net {v.chamber!r} is also a channel side")
        if v.side1 == v.side2:
            warnings.append(f"degenerate valve {v.name}: both sides on net {v.side1!r}")

    for net in sorted(netlist.vents):
        check_ref(net, "vent")

    port_names: set[str] = set()
    power_nets: set[str] = set()
    for p in netlist.ports:
        if p.name in port_names:
            errors.append(f"duplicate port {p.name!r}")
        port_names.add(p.name)
        check_ref(p.net, f"port {p.name}")
        if p.role is PortRole.POWER_VAC:
            power_nets.add(p.net)
        if p.drivable and p.net in netlist.vents and p.role is not PortRole.POWER_VAC:
            warnings.append(f"undrivable input port {p.name}: net {p.net!r} is vented")

    for net in sorted(power_nets & netlist.vents):
        errors.append(f"net {net!r} is both a vent and a power vacuum input")

    for a, b in netlist.via_merges:
        if a not in seen:
            errors.append(f"unknown net {a!r} referenced by via")
        if a == b:
            errors.append(f"via {a!r} merges a net with itself")

    used: set[str] = set(netlist.vents)
    used.update(p.net for p in netlist.ports)
    for v in netlist.valves:
        used.update(v.nets)
    for n in nets:
        if n not in used:
            warnings.append(f"net {n!r} has no connections")

    return ValidationReport(tuple(errors), tuple(warnings))


def rename_net(netlist: Netlist, old: str, new: str) -> Netlist:
    """Rewrite every reference to ``old`` as ``new`` (no bookkeeping)."""

    def r(n: str) -> str:
        return new if n == old else n

    return netlist.replace(
        nets=tuple(n for n in netlist.nets if n != old),
        valves=tuple(Valve(v.name, r(v.chamber), r(v.side1), r(v.side2)) for v in netlist.valves),
        vents=frozenset(r(n) for n in netlist.vents),
        ports=tuple(Port(p.name, r(p.net), p.role) for p in netlist.ports),
    )


def merge_via(netlist: Netlist, a: str, b: str) -> Netlist:
    """Join net ``b`` into net ``a`` through a membrane via."""
    for n in (a, b):
        if not netlist.has_net(n):
            raise NetlistError(f"unknown net {n!r}")
    if a == b:
        raise NetlistError(f"self-merge of net {a!r}")
    if a in netlist.vents and b in netlist.vents:
        # would silently drop a vent from the budget
        raise NetlistError(f"via joins two vented nets {a!r} and {b!r}")
    merged = rename_net(netlist, b, a)
    return merged.replace(via_merges=netlist.via_merges + ((a, b),))


def budget(netlist: Netlist) -> Budget:
    return Budget(len(netlist.valves), len(netlist.vents), len(netlist.via_merges))


def ports_on(netlist: Netlist, net: str) -> list[Port]:
    return [p for p in netlist.ports if p.net == net]


class NetlistBuilder:
    """Mutable accumulator used by the gate constructors."""

    def __init__(self) -> None:
        self.nets: list[str] = []
        self.valves: list[Valve] = []
        self.vents: set[str] = set()
        self.ports: list[Port] = []

    def net(self, *names: str) -> None:
        for n in names:
            if n not in self.nets:
                self.nets.append(n)

    def valve(self, name: str, chamber: str, side1: str, side2: str) -> None:
        self.net(chamber, side1, side2)
        self.valves.append(Valve(name, chamber, side1, side2))

    def vent(self, net: str) -> None:
        self.net(net)
        self.vents.add(net)

    def port(self, name: str, net: str, role: PortRole) -> Port:
        self.net(net)
        p = Port(name, net, role)
        self.ports.append(p)
        return p

    def build(self, vias: Iterable[tuple[str, str]] = ()) -> Netlist:
        nl = Netlist(tuple(self.nets), tuple(self.valves), frozenset(self.vents), tuple(self.ports))
        for a, b in vias:
            nl = merge_via(nl, a, b)
        return nl
