import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from comca.embeddings import AttributeEntry, EmbeddingMatrix, Vocabulary

FIXTURES = Path(__file__).parent / "fixtures"


def unit_rows(rng, n, d):
    data = rng.normal(size=(n, d))
    return data / np.linalg.norm(data, axis=1, keepdims=True)


def make_matrix(rng, n, d, kind="image", prefix="v"):
    return EmbeddingMatrix(ids=[f"{prefix}{i}" for i in range(n)],
                           data=unit_rows(rng, n, d), kind=kind)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def small_vocab():
    return Vocabulary(
        attributes=[AttributeEntry("red"), AttributeEntry("wet")],
        objects=["car", "dog", "apple"],
    )


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid and rep.when == "call":
                name = nodeid.split("::")[-1].replace("test_", "", 1)
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append(f"  {name}: {status}")
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
