import dataclasses

import pytest

from stokes_darcy_dd.experiments.config import defaults
from stokes_darcy_dd.experiments.drivers import build_problem


def small_problem(r=2.0, n=4, T=0.02, dt_f=0.01, dt_p=0.01, test_case=1, **kw):
    cfg = defaults(test_case)
    cfg = dataclasses.replace(cfg, T=T, fluid=cfg.fluid.replace(r=r),
                              porous=cfg.porous.replace(r=r), **kw)
    problem, exact = build_problem(cfg, n, dt_f, dt_p)
    return problem, exact


@pytest.fixture
def linear_problem():
    problem, _ = small_problem(r=2.0)
    yield problem
    problem.close()


@pytest.fixture
def thinning_problem():
    problem, _ = small_problem(r=1.5)
    yield problem
    problem.close()


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


def record_acceptance(name: str, ok: bool, detail: str) -> str:
    line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
