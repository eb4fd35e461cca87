import numpy as np
import pytest

from mhnurf.embeddings import EmbeddingTable


@pytest.fixture
def tiny_table():
    return EmbeddingTable.from_dict(
        {"error": [1.0, 0.0, 0.5], "high": [0.0, 1.0, -0.5], "slow": [0.3, -0.2, 1.0],
         "runtime": [0.7, 0.1, 0.2]},
        3,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request, capsys):
    """Record one acceptance line; the test body sets ``.detail`` and asserts."""

    class Line:
        detail = ""

    line = Line()
    yield line
    key = request.node.name
    failed = request.node.rep_call.failed if hasattr(request.node, "rep_call") else True
    ACCEPTANCE[key] = (not failed, line.detail)
    with capsys.disabled():
        print(f"\n{'PASS' if not failed else 'FAIL'}  {key}  {line.detail}")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {detail}")
