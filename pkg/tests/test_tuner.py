import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from missile_lqg import presets, tuner
from missile_lqg.errors import ObjectiveNaN
from missile_lqg.plant import from_matrices
from missile_lqg.sim import step_ise
from missile_lqg.synthesis import hybrid_design
from missile_lqg.tuner import (
    PENALTY,
    SimplexOptions,
    TuneMode,
    decode,
    encode,
    initial_simplex,
    nelder_mead,
    objective,
    results_to_csv,
    tune,
)


def test_quadratic_2d():
    res = nelder_mead(lambda x: (x[0] - 2) ** 2 + (x[1] - 3) ** 2, [0.0, 0.0])
    np.testing.assert_allclose(res.x, [2.0, 3.0], atol=1e-5)
    assert res.converged


def test_abs_1d():
    res = nelder_mead(lambda x: abs(x[0]), [1.0])
    assert abs(res.x[0]) < 1e-5


def test_rosenbrock():
    res = nelder_mead(lambda x: 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2, [-1.2, 1.0])
    assert res.fun < 1e-6
    assert res.nit <= 500


def test_initial_simplex_construction():
    S = initial_simplex(np.array([2.0, 0.0]), SimplexOptions())
    np.testing.assert_allclose(S, [[2.0, 0.0], [2.1, 0.0], [2.0, 0.00025]])


def test_options_validation():
    with pytest.raises(ValueError):
        SimplexOptions(expansion=0.5)
    with pytest.raises(ValueError):
        SimplexOptions(shrink=1.0)


def test_nan_objective_aborts_with_point():
    def f(x):
        return float("nan") if x[0] > 0.5 else (x[0] - 1) ** 2

    with pytest.raises(ObjectiveNaN) as info:
        nelder_mead(f, [0.0])
    assert info.value.point[0] > 0.5
    assert math.isnan(info.value.log[-1][1])


def test_max_iter_respected():
    res = nelder_mead(lambda x: float(np.sum(x ** 2)), [1.0, 1.0, 1.0], SimplexOptions(max_iter=3))
    assert res.nit == 3 and not res.converged


def test_deterministic():
    f = lambda x: (x[0] - 0.3) ** 4 + abs(x[1] + 1)
    a, b = nelder_mead(f, [1.0, 1.0]), nelder_mead(f, [1.0, 1.0])
    np.testing.assert_array_equal(a.x, b.x)
    assert len(a.log) == len(b.log)
    assert all(np.array_equal(p[0], q[0]) and p[1] == q[1] for p, q in zip(a.log, b.log))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4), st.integers(0, 2**16))
def test_never_worse_than_start(x0, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(len(x0))
    f = lambda x: float(np.sum(np.abs(x - c)) + np.sin(3 * x).sum())
    res = nelder_mead(f, x0, SimplexOptions(max_iter=60))
    assert res.fun <= f(np.asarray(x0, dtype=float))


def test_objective_at_unit_candidate(nominal):
    J = objective(nominal, TuneMode.FULL, encode([1, 1, 1], 1.0, 100.0))
    assert 0 < J < PENALTY
    _, _, loop = hybrid_design(nominal, presets.UNIT_WEIGHTS, presets.DESIGN_NOISE.with_q(100.0))
    assert loop.is_stable()
    assert J == pytest.approx(step_ise(loop), rel=1e-12)


def test_objective_penalises_synthesis_failure():
    unobservable = from_matrices(np.diag([-1.0, -2.0, -3.0]), [[1.0], [1.0], [1.0]], [[1.0, 0.0, 0.0]],
                                 Gamma=[[0.0], [0.0], [1.0]])
    assert objective(unobservable, TuneMode.FULL, np.zeros(5)) >= PENALTY


def test_objective_penalises_unstable_loop(nominal, monkeypatch):
    _, ctrl, loop = hybrid_design(nominal, presets.UNIT_WEIGHTS, presets.DESIGN_NOISE)
    bad = type(loop)(loop.A + 10 * np.eye(loop.n_states), loop.B, loop.C, loop.D,
                     loop.output_names, loop.plant, loop.controller)
    monkeypatch.setattr(tuner, "hybrid_design", lambda *a, **k: (None, ctrl, bad))
    assert objective(nominal, TuneMode.FULL, np.zeros(5)) >= PENALTY


def test_fixed_mode_ignores_q_coordinates(nominal):
    z = encode([1, 1, 1], 0.5, 10.0)
    perturbed = z.copy()
    perturbed[:3] = [2.0, -3.0, 0.7]
    assert objective(nominal, TuneMode.FIXED_Q, z) == objective(nominal, TuneMode.FIXED_Q, perturbed)
    weights, q = decode(z, TuneMode.FIXED_Q, nominal)
    np.testing.assert_array_equal(weights.Q, np.diag([1.0, 0.0, 0.0]))
    assert q == pytest.approx(10.0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.05, 20.0), min_size=5, max_size=5))
def test_log_round_trip(vals):
    z = encode(vals[:3], vals[3], vals[4])
    weights, q = decode(z, TuneMode.FULL, None)
    np.testing.assert_allclose(encode(np.diag(weights.Q), weights.R, q), z, atol=1e-12)


def test_tune_result_invariants(nominal):
    res = tune(nominal, TuneMode.FIXED_Q, 100.0, SimplexOptions(max_iter=15))
    assert res.J_min <= res.J_initial
    assert res.J_min == pytest.approx(objective(nominal, TuneMode.FIXED_Q, res.candidate), abs=1e-9)
    again = tune(nominal, TuneMode.FIXED_Q, 100.0, SimplexOptions(max_iter=15))
    assert again.J_min == res.J_min and again.q_opt == res.q_opt
    assert res.Q_diag is None


def test_table_csv_layout(nominal):
    rows = [tune(nominal, mode, 10.0, SimplexOptions(max_iter=2)) for mode in TuneMode]
    lines = results_to_csv(rows).splitlines()
    assert lines[0] == "J_min,q_initial,q_opt,Q1,Q2,Q3,R"
    full, fixed = lines[1].split(","), lines[2].split(",")
    assert all(full[3:6])
    assert fixed[3:6] == ["", "", ""]


def test_tuned_not_worse_than_heuristic(nominal, tuned_tables):
    for mode, results in tuned_tables.items():
        for res in results:
            heuristic = objective(nominal, TuneMode.FULL, encode([0.01] * 3, 0.01, res.q_initial))
            assert res.J_min <= heuristic, f"{mode.value} q0={res.q_initial}: {res.J_min:.4g} > {heuristic:.4g}"
