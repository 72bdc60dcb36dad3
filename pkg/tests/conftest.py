import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evopath import _pykernels  # noqa: E402

try:
    from evopath import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNELS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


@pytest.fixture(params=KERNELS, ids=lambda k: k.BACKEND)
def kernels(request, monkeypatch):
    """Run a test once per available kernel backend."""
    from evopath import _backend
    monkeypatch.setattr(_backend, "expand", request.param.expand)
    monkeypatch.setattr(_backend, "gestalt_matches", request.param.gestalt_matches)
    return request.param


@pytest.fixture
def citizenship_hin():
    from evopath.hin import load_hin
    facts = [
        ("a", "livesIn", "c1"),
        ("b", "livesIn", "c1"),
        ("a", "citizenOf", "c1"),
        ("c", "citizenOf", "c2"),
    ]
    types = [("a", "Person"), ("b", "Person"), ("c", "Person"),
             ("c1", "Country"), ("c2", "Country")]
    return load_hin(facts, types)


# -- acceptance reporting -------------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``criterion(n, detail)`` after the checks. A test that fails
    before calling it is reported as FAIL with the assertion message.
    """
    state = {}

    def record(n, detail):
        state["n"], state["detail"] = n, detail

    yield record
    n = state.get("n") or getattr(request.node.function, "criterion_no", None)
    if n is None:
        return
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {state.get('detail', '')}".rstrip()
    if not ok and rep is not None and rep.longrepr is not None:
        msg = str(getattr(rep.longrepr, "reprcrash", None) and rep.longrepr.reprcrash.message or "")
        line += f"  [{msg.splitlines()[0] if msg else 'error'}]"
    _ACCEPTANCE[n] = line
    print(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
