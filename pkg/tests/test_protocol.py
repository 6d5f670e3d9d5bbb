import itertools

import pytest
from hypothesis import given, strategies as st

from oracles import popcount_parity
from pneusim import gates, protocol
from pneusim.dsl import EventKind
from pneusim.engine import run_events
from pneusim.netlist import ATM, VAC
from pneusim.protocol import Fragment, Mode, ParityMethod, PhaseConfig, parity


def test_parity_examples():
    for m in ParityMethod:
        assert parity((1, 1, 0), m) == 0
        assert parity((0, 0, 0), m) == 0


def test_parity_methods_agree_exhaustively():
    for n in range(1, 13):
        for bits in itertools.product((0, 1), repeat=n):
            expected = popcount_parity(bits)
            assert all(parity(bits, m) == expected for m in ParityMethod)


def test_parity_rejects_bad_input():
    with pytest.raises(ValueError):
        parity(())
    with pytest.raises(ValueError):
        parity((0, 2))


def test_single_flips_change_parity_double_flips_do_not():
    for bits in itertools.product((0, 1), repeat=3):
        p = parity(bits)
        for i in range(3):
            flipped = list(bits)
            flipped[i] ^= 1
            assert parity(flipped) != p
        for i, j in itertools.combinations(range(3), 2):
            flipped = list(bits)
            flipped[i] ^= 1
            flipped[j] ^= 1
            assert parity(flipped) == p


def test_phase_config():
    cfg = PhaseConfig()
    assert (cfg.run_duration_ms, cfg.check_duration_ms, cfg.run_step_ms) == (22500, 39000, 750)
    assert cfg.cycle_ms == 6000 and cfg.period_ms == 61500
    with pytest.raises(ValueError):
        PhaseConfig(operate_ms=0)
    with pytest.raises(ValueError):
        PhaseConfig(check_pattern="random")


class TestResetSequence:
    def test_default_events(self):
        frag = protocol.reset_sequence()
        assert frag.duration_ms == 5000
        sets = [e for e in frag.events if e.kind is EventKind.SET]
        assert len(sets) == 8
        assert [(e.port, e.level) for e in sets[:3]] == [("power3", ATM), ("power2", ATM), ("power1", ATM)]
        times = [e.time_ms for e in sets[:3]]
        assert times == sorted(set(times))
        assert [(e.port, e.level) for e in sets[3:7]] == [
            ("reset1", VAC), ("reset2", VAC), ("reset1", ATM), ("reset2", ATM),
        ]
        assert sets[3].time_ms > times[-1]
        assert sets[5].time_ms - sets[3].time_ms == 500
        assert (sets[7].port, sets[7].level) == ("parity", ATM)
        assert max(e.time_ms for e in sets) < 5000

    def test_clear_inputs(self):
        frag = protocol.reset_sequence(clear_inputs=("bit1", "parity"))
        assert [e.port for e in frag.events][-2:] == ["bit1", "parity"]


class TestCheckCycle:
    def test_parity_drive(self):
        assert protocol.check_cycle((0, 1, 0)).events[0].level is VAC
        assert protocol.check_cycle((1, 1, 0)).events[0].level is ATM

    def test_duration_and_powers(self):
        frag = protocol.check_cycle((1, 0, 0), label="c")
        assert frag.duration_ms == 6000
        on = [e for e in frag.events if e.kind is EventKind.SET and e.level is VAC and e.port.startswith("power")]
        assert {e.port for e in on} == {"power1", "power2", "power3"}
        assert all(e.time_ms == 0 for e in on)
        (mark,) = [e for e in frag.events if e.kind is EventKind.CHECKPOINT]
        assert mark.time_ms == 999 and mark.label == "c"

    def test_never_drives_control_bits(self):
        frag = protocol.check_cycle((1, 1, 1))
        assert not any(e.port in protocol.CONTROL_BITS for e in frag.events if e.kind is EventKind.SET)

    def test_requires_bits(self):
        with pytest.raises(ValueError):
            protocol.check_cycle(())


@given(st.lists(st.lists(st.integers(0, 2000), max_size=4), min_size=1, max_size=4))
def test_fragments_compose_associatively(time_lists):
    frags = [
        Fragment(tuple(protocol.ScenarioEvent.checkpoint(t, f"f{i}-{k}") for k, t in enumerate(sorted(ts))), 2001)
        for i, ts in enumerate(time_lists)
    ]
    left = Fragment((), 0)
    for f in frags:
        left = left.then(f)
    right = Fragment((), 0)
    for f in reversed(frags):
        right = f.then(right)
    assert left == right == Fragment.concat(frags)
    for i in range(len(frags)):
        mine = [e.label for e in left.events if e.label.startswith(f"f{i}-")]
        assert mine == [e.label for e in frags[i].events]


class TestPhaseSchedule:
    def test_continuous_three_steps(self):
        events = protocol.phase_schedule([(1, 0, 0), (0, 1, 0), (0, 0, 1)])
        marks = [e for e in events if e.kind is EventKind.CHECKPOINT]
        assert len(marks) == 3
        assert [m.time_ms for m in marks] == [999, 6999, 12999]

    def test_phased_period(self):
        cfg = PhaseConfig()
        events = protocol.phase_schedule([(1, 0, 0), (0, 1, 0), (0, 0, 1)], cfg, Mode.PHASED, periods=2)
        runs = [e.time_ms for e in events if e.kind is EventKind.CHECKPOINT and e.label.startswith("run")]
        assert runs == [0, 61500]
        assert max(e.time_ms for e in events) < 2 * 61500

    def test_phased_check_phase(self):
        cfg = PhaseConfig()
        events = protocol.phase_schedule([(1, 0, 0)], cfg, Mode.PHASED)
        checks = [e for e in events if e.kind is EventKind.CHECKPOINT and e.label.startswith("check")]
        assert len(checks) == 3
        assert all(cfg.run_duration_ms <= c.time_ms < cfg.period_ms for c in checks)
        power_on = [e.time_ms for e in events if e.kind is EventKind.SET and e.port == "power1" and e.level is VAC]
        assert all(t >= cfg.run_duration_ms for t in power_on)
        # each check cycle fits inside the check phase
        assert max(power_on) + cfg.cycle_ms <= cfg.period_ms
        steps = [e for e in events if e.kind is EventKind.SET and e.port == "bit1" and e.time_ms < 22500]
        assert len(steps) == 30

    def test_all_ones_pattern(self):
        cfg = PhaseConfig(check_pattern="all_ones")
        events = protocol.phase_schedule([(1, 0, 0)], cfg, Mode.PHASED)
        checks = [e.label for e in events if e.kind is EventKind.CHECKPOINT and e.label.startswith("check")]
        assert checks == ["check000.0-111"]

    def test_empty_steps(self):
        with pytest.raises(ValueError):
            protocol.phase_schedule([])


def _check_after(prior, test_bits, test_parity, reset: bool):
    """Run a check on ``prior``, optionally reset, then check ``test``."""
    h = gates.build_parity_detector()
    cfg = PhaseConfig()
    drive = protocol.drive_bits(prior[:3]).events + (protocol.ScenarioEvent.set(0, "parity", VAC if prior[3] else ATM),)
    on = tuple(protocol.ScenarioEvent.set(0, p, VAC) for p in protocol.POWER_ON)
    first = Fragment(drive + on, cfg.operate_ms)
    reset_frag = protocol.reset_sequence(cfg, clear_inputs=protocol.CONTROL_BITS + (protocol.PARITY,))
    if not reset:
        reset_frag = Fragment(tuple(e for e in reset_frag.events if not e.port.startswith("reset")), cfg.reset_ms)
    second = protocol.drive_bits(test_bits).then(
        Fragment((protocol.ScenarioEvent.set(0, "parity", VAC if test_parity else ATM),), 0)
    ).then(Fragment(on + (protocol.ScenarioEvent.checkpoint(cfg.operate_ms - 1, "test"),), cfg.operate_ms))
    scenario = first.then(reset_frag).then(second)
    trace = run_events(h.netlist, scenario.events)
    return trace, trace.level(trace.checkpoints()["test"], "error")


def test_reset_clears_any_prior_state():
    for prior in itertools.product((0, 1), repeat=4):
        _, level = _check_after(prior, (0, 0, 0), 0, reset=True)
        assert level is ATM, prior
