import json
from pathlib import Path

import pytest

from shrinktest.priors import horseshoe, neg, standard_double_pareto, strawderman_berger

DATA = Path(__file__).parent / "data"

ALL_PRIORS = [horseshoe(), strawderman_berger(), neg(), standard_double_pareto()]


@pytest.fixture(scope="session")
def golden():
    return json.loads((DATA / "golden.json").read_text())


@pytest.fixture(params=ALL_PRIORS, ids=lambda s: s.label)
def any_prior(request):
    return request.param


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """record(n, ok, detail) stores one summary line per acceptance criterion."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(n, ok, detail):
        store[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(store[n])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for n in sorted(store):
            terminalreporter.write_line(store[n])
