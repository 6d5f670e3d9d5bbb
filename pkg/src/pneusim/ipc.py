"""The monitored plant: a three-bellows compression device teed onto the detector.

Each bellows shares its net with a detector control-bit input (a tee
junction), so a punctured bellows or cut tube is seen by the detector
directly.  A free bellows on the expected-parity line shows the parity
drive.  The error output drives a level shifter that opens a whistle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .dsl import ScenarioEvent
from .engine import RunError, SimConfig, Trace, run_events
from .faults import Fault
from .gates import GateHandle, build_parity_detector
from .netlist import ATM, VAC, Netlist, Port, PortRole, PressureState
from . import protocol

# bit1 -> bit2 -> bit3, one bellows squeezed at a time
PERISTALTIC_STEPS = ((1, 0, 0), (0, 1, 0), (0, 0, 1))

BELLOWS = ("bellows1", "bellows2", "bellows3")
PARITY_BELLOWS = "parity_bellows"


class Whistle(Enum):
    SILENT = "SILENT"
    SOUNDING = "SOUNDING"
    UNKNOWN = "UNKNOWN"


class Bellows(Enum):
    CONTRACTED = "CONTRACTED"
    EXTENDED = "EXTENDED"
    UNKNOWN = "UNKNOWN"


def level_shift(error_level: PressureState) -> Whistle:
    if error_level is VAC:
        return Whistle.SOUNDING
    if error_level is ATM:
        return Whistle.SILENT
    return Whistle.UNKNOWN


def bellows_state(level: PressureState) -> Bellows:
    if level is VAC:
        return Bellows.CONTRACTED
    if level is ATM:
        return Bellows.EXTENDED
    return Bellows.UNKNOWN


@dataclass(frozen=True)
class ActuationStep:
    bits: tuple[int, ...]
    duration_ms: int

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ValueError("step duration must be positive")


@dataclass(frozen=True)
class IpcSystem:
    detector: GateHandle
    netlist: Netlist
    bellows_nets: tuple[str, ...]
    parity_indicator_net: str

    def whistle(self, trace: Trace, entry) -> Whistle:
        return level_shift(trace.level(entry, protocol.ERROR))


def build_ipc_system(detector: GateHandle | None = None) -> IpcSystem:
    detector = detector or build_parity_detector()
    nl = detector.netlist
    bit_nets = tuple(nl.port(b).net for b in protocol.CONTROL_BITS)
    parity_net = nl.port(protocol.PARITY).net
    extra = [Port(name, net, PortRole.GENERIC_OUT) for name, net in zip(BELLOWS, bit_nets)]
    extra.append(Port(PARITY_BELLOWS, parity_net, PortRole.GENERIC_OUT))
    return IpcSystem(detector, nl.replace(ports=nl.ports + tuple(extra)), bit_nets, parity_net)


@dataclass(frozen=True)
class LogEvent:
    time_ms: int
    kind: str  # "whistle" or "checkpoint"
    value: str


@dataclass
class IpcRun:
    system: IpcSystem
    trace: Trace
    events: list[LogEvent] = field(default_factory=list)

    def whistle_transitions(self) -> list[LogEvent]:
        return [e for e in self.events if e.kind == "whistle"]

    def sounding_times(self) -> list[int]:
        return [e.time_ms for e in self.whistle_transitions() if e.value == Whistle.SOUNDING.value]

    def checks(self) -> dict[str, Whistle]:
        """Whistle state at every check checkpoint, by label."""
        marks = self.trace.checkpoints()
        return {
            label: self.system.whistle(self.trace, entry)
            for label, entry in marks.items()
            if label.startswith("check")
        }

    def events_csv(self) -> str:
        lines = ["time_ms,kind,value"]
        lines += [f"{e.time_ms},{e.kind},{e.value}" for e in self.events]
        return "\n".join(lines) + "\n"


def _fault_events(faults) -> list[ScenarioEvent]:
    out = []
    for t, what in faults:
        if isinstance(what, Fault):
            out.append(ScenarioEvent.inject(t, what))
        else:
            out.append(ScenarioEvent.clear(t, str(what)))
    return out


def ipc_scenario(
    mode: protocol.Mode | str,
    faults: Sequence = (),
    cfg: protocol.PhaseConfig = protocol.PhaseConfig(),
    total_ms: int = 60000,
    steps: Sequence[Sequence[int]] = PERISTALTIC_STEPS,
) -> list[ScenarioEvent]:
    if total_ms <= 0:
        raise ValueError("total_ms must be positive")
    mode = protocol.Mode(mode)
    if mode is protocol.Mode.CONTINUOUS:
        n = math.ceil(total_ms / cfg.cycle_ms)
        seq = [steps[i % len(steps)] for i in range(n)]
        events = protocol.phase_schedule(seq, cfg, mode)
    else:
        periods = math.ceil(total_ms / cfg.period_ms)
        events = protocol.phase_schedule(steps, cfg, mode, periods=periods)
    events = [e for e in events if e.time_ms < total_ms]
    return events + _fault_events(faults)


def run_ipc(
    mode: protocol.Mode | str,
    faults: Sequence = (),
    cfg: protocol.PhaseConfig = protocol.PhaseConfig(),
    total_ms: int = 60000,
    config: SimConfig = SimConfig(),
    system: IpcSystem | None = None,
) -> IpcRun:
    """Operate the device for ``total_ms`` and watch the whistle.

    ``faults`` holds (time_ms, Fault) pairs to inject and (time_ms, id)
    pairs to clear.
    """
    system = system or build_ipc_system()
    events = ipc_scenario(mode, faults, cfg, total_ms)
    try:
        trace = run_events(system.netlist, events, config)
    except RunError as exc:
        where = "before the first checkpoint"
        if exc.trace is not None:
            labels = [e.label for e in exc.trace.entries if e.label]
            if labels:
                where = f"after checkpoint {labels[-1]}"
        raise RunError(f"{exc} ({where})", exc.trace) from exc

    run = IpcRun(system, trace)
    last = Whistle.SILENT
    for entry in trace.entries:
        if entry.label is not None:
            run.events.append(LogEvent(entry.time_ms, "checkpoint", entry.label))
        w = system.whistle(trace, entry)
        if w is not last:
            run.events.append(LogEvent(entry.time_ms, "whistle", w.value))
            last = w
    return run
