import math
import random

import pytest

from sqkdsim.quantum import QuantumRegister

# Uniform draws that force each binary choice.  Every coin in the simulator
# picks its first value (Z basis, bit 0, SIFT mode, outcome 0, "yes") when
# the draw falls below the threshold.
LOW = 0.25
HIGH = 0.75
S = 1 / math.sqrt(2)


class ScriptedStream:
    """Random stream that replays fixed values, then falls back to a seeded RNG."""

    def __init__(self, values, fallback_seed=0):
        self.values = list(values)
        self.fallback = random.Random(fallback_seed)
        self.calls = 0

    def random(self):
        self.calls += 1
        if self.values:
            return self.values.pop(0)
        return self.fallback.random()


@pytest.fixture
def scripted():
    return ScriptedStream


def random_state(rng: random.Random, num_qubits: int) -> QuantumRegister:
    amps = [complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(2**num_qubits)]
    norm = math.sqrt(sum(abs(a) ** 2 for a in amps))
    return QuantumRegister([a / norm for a in amps])


def born_probabilities(amps, idx, num_qubits):
    """Direct sum of squared magnitudes where qubit ``idx`` reads 0 / 1."""
    p = [0.0, 0.0]
    for i, a in enumerate(amps):
        p[(i >> (num_qubits - 1 - idx)) & 1] += abs(a) ** 2
    return p


# Acceptance summary: one PASS/FAIL line per criterion at the end of the run.
_ACCEPTANCE: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    report = outcome.get_result()
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, [title, True])
    if report.failed or (report.when == "call" and report.skipped):
        entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
