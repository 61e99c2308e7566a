import numpy as np
import pytest

from ltvmss import SystemModel


def scalar_system(a, b=1.0, kind="periodic"):
    ctor = SystemModel.periodic if kind == "periodic" else SystemModel.sequence
    return ctor([[[a]]], [[[b]]])


def random_sequence(rng, n, m, length, scale=1.0):
    A = [scale * rng.standard_normal((n, n)) for _ in range(length)]
    B = [rng.standard_normal((n, m)) for _ in range(length)]
    return SystemModel.sequence(A, B)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance summary ------------------------------------------------------

import sys
import time

FULL_RUN_LIMIT = 300.0
_START = {}


def pytest_sessionstart(session):
    _START["t"] = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    elapsed = time.perf_counter() - _START.get("t", time.perf_counter())
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(results, key=str):
        title, ok, detail = results[key]
        tr.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {title} ({detail})")
    if "8" in map(str, results):
        ok = elapsed < FULL_RUN_LIMIT
        tr.write_line(f"criterion 8 (run time): {'PASS' if ok else 'FAIL'}  full test run "
                      f"{elapsed:.1f} s < {FULL_RUN_LIMIT:.0f} s")


def pytest_sessionfinish(session, exitstatus):
    mod = sys.modules.get("test_acceptance")
    if getattr(mod, "RESULTS", None) and time.perf_counter() - _START.get("t", 0) >= FULL_RUN_LIMIT:
        session.exitstatus = 1
