"""Gate constructors, the 21-valve parity detector, and truth tables.

Gates are transmission networks: an output only reaches vacuum through
open valves from a powered supply, so outputs mean something only while
the power port is driven to vacuum.

XOR (six valves, two vents)::

    A: chamber a   pwr -- out        (the two supply valves form an OR)
    B: chamber b   pwr -- out
    C: chamber b   out -- m1         D: chamber a   m1 -- vent1
    E: chamber b   out -- m2         F: chamber a   m2 -- vent2

With both inputs at vacuum the two series pairs connect the output to
the vents, which outweigh the supply (vent-dominated resolution); two
pairs in parallel double the venting capacity.  The b-gated valve sits
next to the output so that the middle nodes stay joined to it while b is
held, and are vented with it.  With neither input at vacuum the output is
isolated and keeps its previous charge, which is why the detector needs
its unlatch valves.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

from .engine import SimConfig, SimState, initial_state, run_events, settle
from .dsl import ScenarioEvent
from .netlist import ATM, VAC, Netlist, NetlistBuilder, Port, PortRole, PressureState
from . import protocol


class GateKind(Enum):
    AND = "AND"
    OR = "OR"
    XOR = "XOR"


@dataclass(frozen=True)
class GateHandle:
    netlist: Netlist
    input_ports: tuple[Port, ...]
    output_port: Port
    power_ports: tuple[Port, ...] = ()
    reset_ports: tuple[Port, ...] = ()
    name: str = ""


def _xor_into(b: NetlistBuilder, letters: str, a: str, bb: str, pwr: str, out: str, tag: str) -> None:
    m1, m2, v1, v2 = f"{tag}_m1", f"{tag}_m2", f"{tag}_vent1", f"{tag}_vent2"
    b.valve(letters[0], a, pwr, out)
    b.valve(letters[1], bb, pwr, out)
    b.valve(letters[2], bb, out, m1)
    b.valve(letters[3], a, m1, v1)
    b.valve(letters[4], bb, out, m2)
    b.valve(letters[5], a, m2, v2)
    b.vent(v1)
    b.vent(v2)


def build_gate(kind: GateKind | str) -> GateHandle:
    kind = GateKind(kind)
    b = NetlistBuilder()
    pa = b.port("a", "a", PortRole.GENERIC_IN)
    pb = b.port("b", "b", PortRole.GENERIC_IN)
    pp = b.port("pwr", "pwr", PortRole.POWER_VAC)
    if kind is GateKind.AND:
        b.valve("A", "a", "pwr", "mid")
        b.valve("B", "b", "mid", "out")
    elif kind is GateKind.OR:
        b.valve("A", "a", "pwr", "out")
        b.valve("B", "b", "pwr", "out")
    else:
        _xor_into(b, "ABCDEF", "a", "b", "pwr", "out", "x")
    po = b.port("out", "out", PortRole.GENERIC_OUT)
    return GateHandle(b.build(), (pa, pb), po, (pp,), (), kind.value)


# Stage k of the detector: (valve letters, power port feeding it).  The
# ordered power-down (3, 2, 1) must first drop the output stage, so no
# powered stage downstream can glitch the error output, and then the first
# stage ahead of the second, which traps vacuum on x2_out.  Power-up runs
# in stage order (2, 1, 3) so no stage computes on an unsettled input.
STAGES = (
    ("ABCDEF", "power2"),
    ("GHIJKL", "power1"),
    ("MNOPQR", "power3"),
)

# Unlatch valves: (name, reset port, net vented).  latch_analysis reports
# only x2_out; S and U also vent the other two stage outputs so that every
# XOR output starts the next check at atmosphere.
UNLATCH = (
    ("S", "reset1", "x1_out"),
    ("T", "reset1", "x2_out"),
    ("U", "reset2", "n_error"),
)


def build_parity_detector(stages=STAGES, unlatch=UNLATCH) -> GateHandle:
    """Three chained XORs computing b1^b2^b3^p, plus unlatch valves S-U.

    Layer crossings are recorded as vias: each power input reaches the
    channel layer through one, and each intermediate XOR output reaches
    the chamber layer of the next stage through one.
    """
    b = NetlistBuilder()
    ports = {}
    for name in protocol.CONTROL_BITS:
        ports[name] = b.port(name, f"n_{name}", PortRole.CONTROL_BIT)
    ports["parity"] = b.port("parity", "n_parity", PortRole.EXPECTED_PARITY)
    for name in protocol.POWER:
        ports[name] = b.port(name, f"n_{name}", PortRole.POWER_VAC)
    for name in protocol.RESET:
        ports[name] = b.port(name, f"n_{name}", PortRole.RESET)

    chain = [
        ("n_bit1", "n_bit2", "x1_out"),
        ("x2_a", "n_bit3", "x2_out"),
        ("x3_a", "n_parity", "n_error"),
    ]
    vias = []
    for k, ((letters, power), (a, bb, out)) in enumerate(zip(stages, chain), start=1):
        pwr = f"x{k}_pwr"
        _xor_into(b, letters, a, bb, pwr, out, f"x{k}")
        vias.append((f"n_{power}", pwr))
    vias += [("x1_out", "x2_a"), ("x2_out", "x3_a")]

    for name, reset_port, net in unlatch:
        vent = f"{name.lower()}_vent"
        b.valve(name, f"n_{reset_port}", net, vent)
        b.vent(vent)

    ports["error"] = b.port("error", "n_error", PortRole.ERROR_OUT)
    netlist = b.build(vias)
    return GateHandle(
        netlist,
        tuple(ports[n] for n in (*protocol.CONTROL_BITS, "parity")),
        ports["error"],
        tuple(ports[p] for _, p in stages),
        tuple(ports[n] for n in protocol.RESET),
        "parity-detector",
    )


def input_combinations(k: int) -> list[tuple[int, ...]]:
    """All 2**k input rows in binary counting order, first input most significant."""
    return list(itertools.product((0, 1), repeat=k))


def _level(bit: int) -> PressureState:
    return VAC if bit else ATM


def row_scenario(handle: GateHandle, rows, hold_ms: int = 1000, cfg: protocol.PhaseConfig | None = None):
    """Events applying each row, reading the output, then resetting.

    Returns (events, labels).  Every row: drive inputs, power on in the
    order of ``handle.power_ports``, hold, checkpoint, then the reset
    protocol with all inputs released.
    """
    cfg = cfg or protocol.PhaseConfig()
    inputs = [p.name for p in handle.input_ports]
    reset = protocol.reset_sequence(
        cfg,
        power=[p.name for p in handle.power_ports],
        reset=[p.name for p in handle.reset_ports],
        clear_inputs=inputs,
    )
    events: list[ScenarioEvent] = []
    labels = []
    t = 0
    for row in rows:
        label = "row-" + "".join(str(v) for v in row)
        labels.append(label)
        events += [ScenarioEvent.set(t, name, _level(v)) for name, v in zip(inputs, row)]
        events += [ScenarioEvent.set(t, p.name, VAC) for p in handle.power_ports]
        events.append(ScenarioEvent.checkpoint(t + hold_ms - 1, label))
        events += reset.at(t + hold_ms)
        t += hold_ms + reset.duration_ms
    return events, labels


def truth_table(handle: GateHandle, config: SimConfig = SimConfig()) -> list[tuple[tuple[int, ...], PressureState]]:
    rows = input_combinations(len(handle.input_ports))
    events, labels = row_scenario(handle, rows)
    trace = run_events(handle.netlist, events, config)
    marks = trace.checkpoints()
    return [(row, trace.level(marks[label], handle.output_port.name)) for row, label in zip(rows, labels)]


def latch_analysis(handle: GateHandle, config: SimConfig = SimConfig(), skip_reset: bool = True) -> dict[str, list]:
    """Internal nets left holding vacuum after a check and power-down.

    For every input row: start from all-atmosphere, drive the inputs,
    power on in stage order, then power down highest-numbered port first.  With ``skip_reset`` the
    reset pulse is omitted, so the result lists the nets an unlatch valve
    has to vent.  Maps net name to the rows that latch it.
    """
    port_nets = {p.net for p in handle.netlist.ports if p.drivable}
    inputs = [p.name for p in handle.input_ports]
    power = [p.name for p in handle.power_ports]
    found: dict[str, list] = {}
    for row in input_combinations(len(inputs)):
        state = initial_state(handle.netlist)
        drives = {n: _level(v) for n, v in zip(inputs, row)}
        state = settle(handle.netlist, state, drives, config)
        for p in power:
            drives[p] = VAC
            state = settle(handle.netlist, state, drives, config)
        for p in sorted(power, reverse=True):
            drives[p] = ATM
            state = settle(handle.netlist, state, drives, config)
        if not skip_reset:
            for r in handle.reset_ports:
                drives[r.name] = VAC
            state = settle(handle.netlist, state, drives, config)
            for r in handle.reset_ports:
                drives[r.name] = ATM
            state = settle(handle.netlist, state, drives, config)
        for net, level in state.pressure.items():
            if level is VAC and net not in port_nets:
                found.setdefault(net, []).append(row)
    return found


def sweep_rows() -> list[tuple[int, int, int, int]]:
    """The 16 detector rows: eight with matching parity, then eight with it flipped."""
    bits = input_combinations(3)
    good = [(*b, protocol.parity(b)) for b in bits]
    bad = [(*b, 1 - protocol.parity(b)) for b in bits]
    return good + bad


def sweep(handle: GateHandle | None = None, hold_ms: int = 15000, config: SimConfig = SimConfig(),
          cfg: protocol.PhaseConfig | None = None):
    """Apply every detector row for ``hold_ms`` with a reset between rows.

    Returns (rows, levels, trace) with levels read at the end of each hold.
    """
    handle = handle or build_parity_detector()
    rows = sweep_rows()
    events, labels = row_scenario(handle, rows, hold_ms, cfg)
    trace = run_events(handle.netlist, events, config)
    marks = trace.checkpoints()
    levels = [trace.level(marks[label], handle.output_port.name) for label in labels]
    return rows, levels, trace
