import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    path = tmp_path_factory.mktemp("cache") / "fields.json"
    old = os.environ.get("SIGMAEQ_CACHE")
    os.environ["SIGMAEQ_CACHE"] = str(path)
    yield path
    if old is None:
        os.environ.pop("SIGMAEQ_CACHE", None)
    else:
        os.environ["SIGMAEQ_CACHE"] = old


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line[1])
