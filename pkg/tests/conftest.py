import numpy as np
import pytest

from ea_error_lab import builders


def triangular_builtins(n_max=10):
    """(label, model) pairs for every upper-triangular built-in with n <= n_max."""
    out = []
    for n in range(1, n_max + 1):
        out.append((f"onemax-obse-{n}", builders.build_onemax_obse(n)))
        out.append((f"onemax-bwse-{n}", builders.build_onemax_bwse(n)))
        out.append((f"needle-bwse-{n}", builders.build_needle_bwse(n)))
        for name in ("square", "log"):
            f = builders.MONO_FUNCTIONS[name]
            out.append((f"mono-{name}-obse-{n}", builders.build_mono_obse(n, f)))
            out.append((f"mono-{name}-bwse-{n}", builders.build_mono_bwse(n, f)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture
def onemax_obse4():
    return builders.build_onemax_obse(4)


@pytest.fixture
def needle_bwse2():
    return builders.build_needle_bwse(2)


def delta(L, state):
    p = np.zeros(L)
    p[state - 1] = 1.0
    return p


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
