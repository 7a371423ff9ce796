import numpy as np
import pytest

from backscatter_sim import carrier as car


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["bluetooth-like", "zigbee-like"])
def ccfg(request):
    return car.preset(request.param)


# acceptance verdicts, one line per criterion, printed after the run
ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        results = ACCEPTANCE[key]
        ok = all(r for r, _ in results)
        detail = "; ".join(d for _, d in results)
        tr.write_line(f"criterion {key:>4}: {'PASS' if ok else 'FAIL'}  {detail}")
