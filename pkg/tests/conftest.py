import sys
from importlib import resources
from pathlib import Path

import pytest

from cmtt.cli import load

CORPUS = Path(str(resources.files("cmtt") / "corpus"))
CORPUS_FILES = sorted(CORPUS.glob("*.elf"))


@pytest.fixture(scope="session")
def corpus():
    """Every corpus file, loaded and checked."""
    return {p.stem: load(str(p), 10**6) for p in CORPUS_FILES}


@pytest.fixture(scope="session")
def nat(corpus):
    return corpus["nat"].signature


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
