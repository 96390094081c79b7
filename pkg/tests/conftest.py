import pathlib

import numpy as np
import pytest

DATA = pathlib.Path(__file__).parent / "data"

# letters used by the worked examples; 0 is reserved for END
IDS = {"a": 1, "b": 2, "c": 3, "d": 4, "e": 5}
NAMES = {v: k for k, v in IDS.items()}


def ids(text):
    return tuple(IDS[t] for t in text.split())


def names(seq):
    return " ".join(NAMES[a] for a in seq)


def read_lines(name):
    return (DATA / name).read_text(encoding="utf-8").splitlines()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy50():
    return read_lines("toy50.txt")


@pytest.fixture(scope="session")
def reorder500():
    return read_lines("reorder500.txt")


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    def record(key, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {key:<3} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
