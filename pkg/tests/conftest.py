import zlib

import numpy as np
import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def rng(request):
    # one stream per test id keeps failures reproducible in isolation
    return np.random.default_rng(zlib.crc32(request.node.name.encode()))


@pytest.fixture
def report(request):
    """Records one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(name, ok, detail):
        status = "N/A" if ok is None else "PASS" if ok else "FAIL"
        line = f"{name}: {status}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split(":")[0][1:])):
            terminalreporter.write_line(line)
