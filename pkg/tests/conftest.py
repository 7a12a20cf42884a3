import numpy as np
import pytest


class ScriptedRng:
    """Feeds a fixed sequence of uniforms to code expecting an RngStream."""

    def __init__(self, values):
        self.values = list(values)
        self.used = 0

    def __len__(self):
        return 1

    def uniform(self, size=None, rows=None):
        k = 1 if size is None else size
        out = np.array(self.values[self.used:self.used + k], dtype=float)
        if out.size < k:
            raise AssertionError("scripted draws exhausted")
        self.used += k
        return out if size is None else out[None, :]


@pytest.fixture
def scripted():
    return ScriptedRng


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """``criterion(n, passed, detail)`` logs one acceptance line and returns ``passed``.

    ``passed=None`` marks a criterion that was not run.
    """
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def log(number, passed, detail):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number}: {status} | {detail}"
        lines.append(line)
        print(line)
        return passed

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
