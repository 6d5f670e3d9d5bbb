import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pneusim.netlist import ATM, VAC, NetlistBuilder, PortRole  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parent.parent / "src" / "pneusim" / "data"

DRIVABLE = [r for r in PortRole if r.drivable and r is not PortRole.POWER_VAC]


def random_netlist(rng: random.Random, max_nets: int = 6):
    """A small random netlist plus random drives for its ports."""
    n = rng.randint(2, max_nets)
    names = [f"n{i}" for i in range(n)]
    b = NetlistBuilder()
    b.net(*names)
    for k in range(rng.randint(1, 5)):
        chamber = rng.choice(names)
        others = [m for m in names if m != chamber]
        s1, s2 = rng.choice(others), rng.choice(others)
        b.valve(f"V{k}", chamber, s1, s2)
    for net in rng.sample(names, rng.randint(0, 2)):
        b.vent(net)
    drives = {}
    for k in range(rng.randint(0, 3)):
        net = rng.choice(names)
        if net in b.vents and rng.random() < 0.7:
            continue
        role = PortRole.POWER_VAC if net not in b.vents and rng.random() < 0.4 else rng.choice(DRIVABLE)
        name = f"p{k}"
        b.port(name, net, role)
        if rng.random() < 0.8:
            drives[name] = rng.choice([ATM, VAC])
    return b.build(), drives


@pytest.fixture
def rng():
    return random.Random(20240611)


_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    if report.when == "call" or report.failed:
        _CRITERIA[number] = ("PASS" if report.passed else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        verdict, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {title}")
