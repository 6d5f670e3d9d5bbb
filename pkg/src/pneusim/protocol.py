"""Controller side of the detector: parity, check cycles, reset, phasing.

Everything here produces scenario events; nothing touches the simulator.
Port names default to the reference detector's ports.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .dsl import ScenarioEvent
from .netlist import ATM, VAC

CONTROL_BITS = ("bit1", "bit2", "bit3")
PARITY = "parity"
POWER = ("power1", "power2", "power3")
# power-up order: the detector's stages in signal order
POWER_ON = ("power2", "power1", "power3")
RESET = ("reset1", "reset2")
ERROR = "error"


class ParityMethod(Enum):
    XOR_FOLD = "XOR_FOLD"
    SUM_MOD2 = "SUM_MOD2"
    POPCOUNT_ODD = "POPCOUNT_ODD"


class Mode(Enum):
    CONTINUOUS = "continuous"
    PHASED = "phased"


def _check_bits(bits: Sequence[int]) -> tuple[int, ...]:
    bits = tuple(bits)
    if not bits:
        raise ValueError("bit vector must not be empty")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"bits must be 0 or 1, got {bits}")
    return bits


def parity(bits: Sequence[int], method: ParityMethod = ParityMethod.XOR_FOLD) -> int:
    bits = _check_bits(bits)
    if method is ParityMethod.XOR_FOLD:
        acc = 0
        for b in bits:
            acc ^= b
        return acc
    if method is ParityMethod.SUM_MOD2:
        return sum(bits) % 2
    return 1 if bits.count(1) % 2 == 1 else 0


@dataclass(frozen=True)
class PhaseConfig:
    run_duration_ms: int = 22500
    check_duration_ms: int = 39000
    run_step_ms: int = 750
    operate_ms: int = 1000
    reset_ms: int = 5000
    reset_pulse_ms: int = 500
    # "sequential": one check per control bit; "all_ones": a single check with every bit set
    check_pattern: str = "sequential"

    def __post_init__(self):
        for name in ("run_duration_ms", "check_duration_ms", "run_step_ms", "operate_ms", "reset_ms", "reset_pulse_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.reset_pulse_ms >= self.reset_ms // 5:
            raise ValueError("reset pulse must fit inside one reset subdivision")
        if self.check_pattern not in ("sequential", "all_ones"):
            raise ValueError(f"unknown check pattern {self.check_pattern!r}")

    @property
    def cycle_ms(self) -> int:
        return self.operate_ms + self.reset_ms

    @property
    def period_ms(self) -> int:
        return self.run_duration_ms + self.check_duration_ms


@dataclass(frozen=True)
class Fragment:
    """A run of events with times relative to the fragment start."""

    events: tuple[ScenarioEvent, ...]
    duration_ms: int

    def then(self, other: "Fragment") -> "Fragment":
        shifted = tuple(e.shifted(self.duration_ms) for e in other.events)
        return Fragment(self.events + shifted, self.duration_ms + other.duration_ms)

    def at(self, t0: int) -> list[ScenarioEvent]:
        return [e.shifted(t0) for e in self.events]

    @staticmethod
    def concat(fragments: Iterable["Fragment"]) -> "Fragment":
        out = Fragment((), 0)
        for f in fragments:
            out = out.then(f)
        return out


def _level(bit: int):
    return VAC if bit else ATM


def reset_sequence(
    cfg: PhaseConfig = PhaseConfig(),
    power: Sequence[str] = POWER,
    reset: Sequence[str] = RESET,
    clear_inputs: Sequence[str] = (PARITY,),
) -> Fragment:
    """Ordered power-down, reset pulse, then inputs back to atmosphere.

    Power ports go off highest-numbered first.  The five stages (three
    power-offs, the pulse, the input release) are spread evenly over
    ``cfg.reset_ms``.  Control bits are left to the plant unless listed
    in ``clear_inputs``.
    """
    step = cfg.reset_ms // 5
    events = [ScenarioEvent.set(i * step, p, ATM) for i, p in enumerate(sorted(power, reverse=True))]
    t = len(power) * step
    events += [ScenarioEvent.set(t, r, VAC) for r in reset]
    events += [ScenarioEvent.set(t + cfg.reset_pulse_ms, r, ATM) for r in reset]
    t += step
    events += [ScenarioEvent.set(t, p, ATM) for p in clear_inputs]
    return Fragment(tuple(events), cfg.reset_ms)


def check_cycle(
    bits: Sequence[int],
    cfg: PhaseConfig = PhaseConfig(),
    label: str | None = None,
) -> Fragment:
    """Power the detector against the expected parity of ``bits``, then reset.

    Power comes up in stage order so each stage settles after its inputs.  The
    control bits themselves are not driven here; the plant owns them.
    A checkpoint is placed at the end of the operate window, where the
    error output is read.
    """
    bits = _check_bits(bits)
    events = [ScenarioEvent.set(0, PARITY, _level(parity(bits)))]
    events += [ScenarioEvent.set(0, p, VAC) for p in POWER_ON]
    if label is not None:
        events.append(ScenarioEvent.checkpoint(cfg.operate_ms - 1, label))
    operate = Fragment(tuple(events), cfg.operate_ms)
    return operate.then(reset_sequence(cfg))


def drive_bits(bits: Sequence[int], ports: Sequence[str] = CONTROL_BITS) -> Fragment:
    return Fragment(tuple(ScenarioEvent.set(0, p, _level(b)) for p, b in zip(ports, bits)), 0)


def _bits_label(prefix: str, bits) -> str:
    return f"{prefix}-" + "".join(str(b) for b in bits)


def phase_schedule(
    steps: Sequence[Sequence[int]],
    cfg: PhaseConfig = PhaseConfig(),
    mode: Mode = Mode.CONTINUOUS,
    periods: int = 1,
) -> list[ScenarioEvent]:
    """Scenario for operating a plant through ``steps`` with error checks.

    CONTINUOUS runs a full check cycle after every step.  PHASED repeats
    ``periods`` times: a run phase stepping through ``steps`` (cyclically)
    every ``run_step_ms`` with the detector unpowered, then a check phase
    in which each control bit in turn is set alone and checked.
    """
    steps = [_check_bits(s) for s in steps]
    if not steps:
        raise ValueError("steps must not be empty")
    mode = Mode(mode)

    if mode is Mode.CONTINUOUS:
        frags = [
            drive_bits(s).then(check_cycle(s, cfg, label=_bits_label(f"check{i:04d}", s)))
            for i, s in enumerate(steps)
        ]
        return list(Fragment.concat(frags).events)

    n_bits = len(steps[0])
    if cfg.check_pattern == "all_ones":
        patterns = [tuple([1] * n_bits)]
    else:
        patterns = [tuple(int(j == i) for j in range(n_bits)) for i in range(n_bits)]
    slot = cfg.check_duration_ms // len(patterns)
    if slot < cfg.cycle_ms:
        raise ValueError("check phase too short for the check cycles it must hold")

    events: list[ScenarioEvent] = []
    k = 0
    n_run = cfg.run_duration_ms // cfg.run_step_ms
    for period in range(periods):
        t0 = period * cfg.period_ms
        events.append(ScenarioEvent.checkpoint(t0, f"run{period:03d}"))
        for j in range(n_run):
            events += drive_bits(steps[k % len(steps)]).at(t0 + j * cfg.run_step_ms)
            k += 1
        t_check = t0 + cfg.run_duration_ms
        for i, pattern in enumerate(patterns):
            label = _bits_label(f"check{period:03d}.{i}", pattern)
            events += drive_bits(pattern).then(check_cycle(pattern, cfg, label=label)).at(t_check + i * slot)
    return events
