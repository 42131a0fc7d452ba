import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture(scope="session")
def db():
    from pcfmatch import conjecture

    return conjecture.default_db()


from hypothesis import settings  # noqa: E402

# oracles (sympy, mpmath, exact Fractions) are slow; determinism matters more than speed
settings.register_profile("repo", deadline=None, derandomize=True, max_examples=100)
settings.load_profile("repo")


# -- acceptance summary: one PASS/FAIL line per criterion -----------------------

_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("acceptance", "")
        label = report.nodeid.split("::")[-1]
        _ACCEPTANCE.append((label, report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, detail in _ACCEPTANCE:
        verdict = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"{verdict}  {label}  {detail}")
