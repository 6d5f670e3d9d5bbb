"""Regenerate the shipped netlists, scenarios and golden CSV files.

Run from the repository root after an intentional behavior change, then
review the diff before committing.
"""

from pathlib import Path

from pneusim import gates, ipc, protocol
from pneusim.dsl import parse_netlist, serialize_netlist, serialize_scenario
from pneusim.engine import run_events
from pneusim.faults import Fault

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "src" / "pneusim" / "data"
FIX = ROOT / "tests" / "fixtures"

# injection times for the shipped case-study scenarios
LEAK_AT, LEAK_CLEAR_AT = 20500, 62500
CUT_AT, CUT_CLEAR_AT = 3500, 70000


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    FIX.mkdir(parents=True, exist_ok=True)

    det = gates.build_parity_detector()
    pnet = serialize_netlist(det.netlist)
    (DATA / "detector.pnet").write_text(pnet)
    assert parse_netlist(pnet) == det.netlist.canonical()

    events, _ = gates.row_scenario(det, gates.sweep_rows(), hold_ms=15000)
    (DATA / "fig4_sweep.pseq").write_text(serialize_scenario(events))
    trace = run_events(det.netlist, events)
    (FIX / "fig4_sweep_trace.csv").write_text(trace.to_csv())

    rows, levels, _ = gates.sweep()
    lines = ["b1,b2,b3,p,error"] + [",".join(map(str, r)) + f",{lv.bit}" for r, lv in sorted(zip(rows, levels))]
    (FIX / "sweep_table.csv").write_text("\n".join(lines) + "\n")

    xor = gates.build_gate("XOR")
    (DATA / "xor.pnet").write_text(serialize_netlist(xor.netlist))
    ev, _ = gates.row_scenario(xor, gates.input_combinations(2))
    (FIX / "xor_trace.csv").write_text(run_events(xor.netlist, ev).to_csv())

    system = ipc.build_ipc_system()
    (DATA / "ipc_system.pnet").write_text(serialize_netlist(system.netlist))
    leak = [(LEAK_AT, Fault.leak("bellows2", "leak2")), (LEAK_CLEAR_AT, "leak2")]
    ev = ipc.ipc_scenario("continuous", leak, total_ms=90000)
    (DATA / "ipc_leak_continuous.pseq").write_text(serialize_scenario(ev))
    cut = [(CUT_AT, Fault.cut("bit3", "cut3", ["bellows3"])), (CUT_CLEAR_AT, "cut3")]
    ev = ipc.ipc_scenario("phased", cut, total_ms=2 * protocol.PhaseConfig().period_ms)
    (DATA / "ipc_cut_phased.pseq").write_text(serialize_scenario(ev))
    run = ipc.run_ipc("phased", cut, total_ms=2 * protocol.PhaseConfig().period_ms)
    (FIX / "ipc_cut_phased_events.csv").write_text(run.events_csv())


if __name__ == "__main__":
    main()
