import time

import numpy as np
import pytest

from missile_lqg import presets
from missile_lqg.plant import build_missile_model, from_matrices, reachability_ranks


@pytest.fixture(scope="session")
def nominal():
    return build_missile_model()


def random_minimal_system(rng, n, stable=False):
    """Random SISO system that is controllable and observable (rejection sampled)."""
    while True:
        A = rng.standard_normal((n, n))
        if stable:
            A -= (np.max(np.linalg.eigvals(A).real) + 0.5 + rng.random()) * np.eye(n)
        B = rng.standard_normal((n, 1))
        C = rng.standard_normal((1, n))
        sys = from_matrices(A, B, C, Gamma=rng.standard_normal((n, 1)))
        if reachability_ranks(sys) == (n, n):
            ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(n)])
            obsv = np.vstack([C @ np.linalg.matrix_power(A, k) for k in range(n)])
            if np.linalg.cond(ctrb) < 1e6 and np.linalg.cond(obsv) < 1e6:
                return sys


@pytest.fixture(scope="session")
def tuned_runs(nominal):
    """Both tuning batches over the q0 ladder with per-run wall time; computed once."""
    from missile_lqg import tuner

    runs = {}
    for mode in (tuner.TuneMode.FULL, tuner.TuneMode.FIXED_Q):
        runs[mode] = []
        for q0 in tuner.Q0_LADDER:
            start = time.perf_counter()
            res = tuner.tune(nominal, mode, q0, noise=presets.DESIGN_NOISE)
            runs[mode].append((res, time.perf_counter() - start))
    return runs


@pytest.fixture(scope="session")
def tuned_tables(tuned_runs):
    return {mode: [res for res, _ in runs] for mode, runs in tuned_runs.items()}


# Acceptance results, printed as one line per criterion at the end of the session.
ACCEPTANCE_LINES = {}


def record_acceptance(number, title, passed, detail):
    line = f"AC-{number:02d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
