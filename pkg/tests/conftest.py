import numpy as np
import pytest

from segfire.model import SegNetConfig, build_segnet
from segfire.nn import HingeLossConfig


# a 24x32 input keeps the default layer pattern but runs in milliseconds
SMALL = SegNetConfig(input_shape=(24, 32, 3), conv_filters=(4, 6, 8), dense_units=(5, 4), seed=3)


@pytest.fixture
def small_config():
    return SMALL


@pytest.fixture
def small_model():
    return build_segnet(SMALL)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def loss_config():
    return HingeLossConfig(penalty_C=1.0, l2_lambda=0.01)


# -- acceptance summary --------------------------------------------------------
# Tests marked ``@pytest.mark.criterion(n, title)`` report one PASS/FAIL line
# per criterion at the end of the run; a criterion with several tests passes
# only when all of them do.

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "failed": []})
    if report.failed:
        entry["ok"] = False
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] else "FAIL"
        extra = f"  (failing: {', '.join(entry['failed'])})" if entry["failed"] else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}{extra}")
