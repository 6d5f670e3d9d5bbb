import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES
from pneusim import protocol
from pneusim.faults import Fault
from pneusim.ipc import Bellows, ActuationStep, Whistle, bellows_state, build_ipc_system, level_shift, run_ipc
from pneusim.netlist import ATM, VAC, X, PortRole

PERIOD = protocol.PhaseConfig().period_ms


def test_level_shift():
    assert level_shift(ATM) is Whistle.SILENT
    assert level_shift(VAC) is Whistle.SOUNDING
    assert level_shift(X) is Whistle.UNKNOWN


def test_bellows_state():
    assert bellows_state(VAC) is Bellows.CONTRACTED
    assert bellows_state(ATM) is Bellows.EXTENDED
    assert bellows_state(X) is Bellows.UNKNOWN


def test_actuation_step_needs_duration():
    with pytest.raises(ValueError):
        ActuationStep((1, 0, 0), 0)


def test_tee_junctions_share_nets():
    system = build_ipc_system()
    nl = system.netlist
    for i in (1, 2, 3):
        assert nl.port(f"bellows{i}").net == nl.port(f"bit{i}").net
        assert nl.port(f"bellows{i}").role is PortRole.GENERIC_OUT
    assert system.bellows_nets == ("n_bit1", "n_bit2", "n_bit3")
    assert nl.port("parity_bellows").net == nl.port("parity").net == system.parity_indicator_net


def test_total_ms_must_be_positive():
    with pytest.raises(ValueError):
        run_ipc("continuous", total_ms=0)


def test_continuous_three_cycles_silent():
    run = run_ipc("continuous", total_ms=3 * 3 * 6000)
    assert run.whistle_transitions() == []
    checks = run.checks()
    assert len(checks) == 9 and set(checks.values()) == {Whistle.SILENT}


@settings(max_examples=8, deadline=None)
@given(mode=st.sampled_from(["continuous", "phased"]), total=st.integers(1, 2 * PERIOD))
def test_no_fault_runs_never_whistle(mode, total):
    assert run_ipc(mode, total_ms=total).whistle_transitions() == []


def test_continuous_leak_sounds_on_every_bit2_check_until_cleared():
    inject_at, clear_at = 20500, 62500
    run = run_ipc("continuous", [(inject_at, Fault.leak("bellows2", "leak2")), (clear_at, "leak2")], total_ms=90000)
    marks = run.trace.checkpoints()
    for label, whistle in run.checks().items():
        t = marks[label].time_ms
        drives_bit2 = label.endswith("-010")
        expected = Whistle.SOUNDING if drives_bit2 and inject_at < t < clear_at else Whistle.SILENT
        assert whistle is expected, label
    first = run.sounding_times()[0]
    first_bit2_check = min(marks[l].time_ms for l in marks if l.endswith("-010") and marks[l].time_ms > inject_at)
    assert first <= first_bit2_check and first > inject_at


def test_phased_cut_detected_within_one_period_then_repaired():
    cut_at, fix_at = 3500, 70000
    run = run_ipc("phased", [(cut_at, Fault.cut("bit3", "cut3", ["bellows3"])), (fix_at, "cut3")], total_ms=2 * PERIOD)
    first = run.sounding_times()[0]
    assert 0 < first - cut_at <= PERIOD
    assert first - cut_at == 45000
    later = {l: w for l, w in run.checks().items() if run.trace.checkpoints()[l].time_ms > fix_at}
    assert later and set(later.values()) == {Whistle.SILENT}
    assert run.events_csv() == (FIXTURES / "ipc_cut_phased_events.csv").read_text()


def test_sounding_coincides_with_error_vacuum():
    run = run_ipc("continuous", [(100, Fault.leak("bellows1", "l"))], total_ms=40000)
    by_time = {}
    for e in run.trace.entries:
        by_time.setdefault(e.time_ms, []).append(e)
    assert run.sounding_times()
    for t in run.sounding_times():
        assert any(run.trace.level(e, "error") is VAC for e in by_time[t])


@pytest.mark.parametrize("fault,step", [
    (Fault.leak("bellows2", "f"), "-010"),
    (Fault.cut("bit3", "f", ["bellows3"]), "-001"),
    (Fault.stuck_valve("A", False, "f"), "-100"),
    (Fault.stuck_bit("bit1", ATM, "f"), "-100"),
])
def test_repair_silences_next_check(fault, step):
    run = run_ipc("continuous", [(500, fault), (20500, "f")], total_ms=36000)
    marks = run.trace.checkpoints()
    checks = sorted(run.checks().items(), key=lambda kv: marks[kv[0]].time_ms)
    operate = protocol.PhaseConfig().operate_ms
    # only checks whose cycle began after the injection; a fault arriving
    # mid-check meets outputs already latched
    started = lambda l: marks[l].time_ms - (operate - 1)  # noqa: E731
    before = [w for l, w in checks if 500 < started(l) and marks[l].time_ms < 20500]
    after = [w for l, w in checks if marks[l].time_ms > 20500]
    assert Whistle.SOUNDING in before
    assert all(w is Whistle.SOUNDING for l, w in checks if l.endswith(step) and 500 < started(l) < 20500)
    assert after[0] is Whistle.SILENT and set(after) == {Whistle.SILENT}
