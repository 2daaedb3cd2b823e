import numpy as np
import pytest

from hoopscore.events import EventStream


def make_stream(shoot, possess=None, made=None, positions=None, labels=None, player_id="s", start=0):
    shoot = np.asarray(shoot, dtype=float)
    n = len(shoot)
    possess = np.zeros(n) if possess is None else np.asarray(possess, dtype=float)
    made = np.zeros(n) if made is None else np.asarray(made, dtype=float)
    if positions is None:
        positions = np.tile([14.0, 7.5], (n, 1))  # centre court: 3-point zone
    return EventStream(player_id, np.arange(start, start + n), np.column_stack([shoot, possess, made]),
                       np.asarray(positions, dtype=float), labels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
