from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# Filled by tests/test_acceptance.py; printed after the run.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def balanced_textbook_ss(cells: np.ndarray) -> tuple[float, float, float]:
    """Closed-form balanced two-way SS_A, SS_B, SS_AB from an (a, b, n) array."""
    a, b, n = cells.shape
    grand = cells.mean()
    mean_a = cells.mean(axis=(1, 2))
    mean_b = cells.mean(axis=(0, 2))
    mean_ab = cells.mean(axis=2)
    ss_a = b * n * float(((mean_a - grand) ** 2).sum())
    ss_b = a * n * float(((mean_b - grand) ** 2).sum())
    inter = mean_ab - mean_a[:, None] - mean_b[None, :] + grand
    ss_ab = n * float((inter**2).sum())
    return ss_a, ss_b, ss_ab


def rel(x: float, y: float) -> float:
    den = max(abs(x), abs(y))
    return 0.0 if den == 0 else abs(x - y) / den


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
