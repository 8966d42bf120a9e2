import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from missile_lqg import numerics as nx
from missile_lqg.errors import DegenerateNumerator, DimensionMismatch, InvalidParams
from missile_lqg.plant import (
    MissileParams,
    TransferFunction,
    augment_with_integrator,
    build_missile_model,
    from_matrices,
    reachability_ranks,
    series,
    ss_to_tf,
    state_space_resolvent,
    system_zeros,
    tf_from_roots,
    tf_to_ss,
)


def test_nominal_matrices(nominal):
    np.testing.assert_allclose(nominal.A, [[-2.7, 1, 0.27], [-5.5, -0.4, -19], [0, 10, -20]])
    np.testing.assert_allclose(nominal.B, [[0], [0], [20]])
    np.testing.assert_allclose(nominal.C, [[1, 0, 0]])
    np.testing.assert_allclose(nominal.Gamma, [[0], [0], [1]])


def test_parameter_variations():
    assert build_missile_model(MissileParams(h=0.0)).A[2, 1] == 0.0
    assert build_missile_model(MissileParams(delta_M_alpha=1.0)).A[1, 0] == pytest.approx(-4.5)


def test_invalid_params():
    with pytest.raises(InvalidParams):
        build_missile_model(MissileParams(tau_s=0.0))
    with pytest.raises(InvalidParams):
        build_missile_model(MissileParams(h=float("nan")))
    with pytest.raises(InvalidParams):
        MissileParams.from_dict({"bogus": 1.0})


def test_params_round_trip():
    p = MissileParams(h=0.3, delta_M_alpha=-0.5)
    assert MissileParams.from_dict(p.to_dict()) == p


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        from_matrices(np.eye(2), np.ones((3, 1)), np.ones((1, 2)))


def test_reachability_ranks(nominal):
    assert reachability_ranks(nominal) == (3, 3)
    assert reachability_ranks(from_matrices(np.zeros((2, 2)), [[1], [0]], [[1, 0]])) == (1, 1)
    # The integral state is controllable from u but, with C_aug = [C, 0], not observable from y.
    assert reachability_ranks(augment_with_integrator(nominal)) == (4, 3)


def test_tf_closed_forms():
    tf = ss_to_tf(from_matrices([[-1.0]], [[1.0]], [[1.0]]))
    np.testing.assert_allclose(tf.num, [1.0])
    np.testing.assert_allclose(tf.den, [1.0, 1.0])
    tf = ss_to_tf(from_matrices([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]]))
    np.testing.assert_allclose(tf.num, [1.0])
    np.testing.assert_allclose(tf.den, [1.0, 0.0, 0.0])


def test_nominal_tf_coefficients(nominal):
    tf = ss_to_tf(nominal)
    np.testing.assert_allclose(tf.num, [5.4, -377.84], rtol=1e-12)
    np.testing.assert_allclose(tf.den, [1.0, 23.1, 258.58, 659.45], rtol=1e-12)


def test_nominal_tf_matches_resolvent(nominal):
    tf = ss_to_tf(nominal)
    for s in (1.0 + 0j, 0.5 + 3j, 20j):
        ref = state_space_resolvent(nominal, s)
        assert abs(tf(s) - ref) <= 1e-9 * abs(ref)


def test_nominal_non_minimum_phase(nominal):
    z = system_zeros(nominal)
    assert np.any(z.real > 0)
    assert z.real.max() == pytest.approx(377.84 / 5.4)


def test_zero_numerator_has_no_zeros():
    with pytest.raises(DegenerateNumerator):
        TransferFunction([0.0], [1.0, 1.0]).zeros()


def test_tf_to_ss_round_trip():
    tf = tf_from_roots(3.0, [-2.0], [-1.0, -4.0, -5.0])
    back = ss_to_tf(tf_to_ss(tf))
    np.testing.assert_allclose(back.num, tf.num, atol=1e-12)
    np.testing.assert_allclose(back.den, tf.den)


def test_series_is_product(nominal):
    lag = from_matrices([[-3.0]], [[3.0]], [[1.0]])
    combo = ss_to_tf(series(nominal, lag))
    p, g = ss_to_tf(nominal), ss_to_tf(lag)
    s = 1.5 + 2j
    assert combo(s) == pytest.approx(p(s) * g(s), rel=1e-10)


def test_augmented_model_structure(nominal):
    aug = augment_with_integrator(nominal)
    assert aug.n_states == 4
    np.testing.assert_allclose(aug.A[3, :3], -nominal.C[0])
    assert aug.A[3, 3] == 0.0
    assert aug.E[3, 0] == 1.0
    ev = nx.eigenvalues(aug.A)
    expected = np.append(nx.eigenvalues(nominal.A), 0.0)
    for z in expected:
        assert np.min(np.abs(ev - z)) < 1e-8


def test_augmented_char_poly_with_zero_output():
    sys = from_matrices([[-1.0, 2.0], [0.0, -3.0]], [[0.0], [1.0]], [[0.0, 0.0]])
    aug = augment_with_integrator(sys)
    np.testing.assert_allclose(nx.char_poly(aug.A), np.polymul(nx.char_poly(sys.A), [1.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(0.05, 1.0), st.floats(0.01, 0.2))
def test_tf_matches_resolvent_over_envelope(dma, h, tau):
    sys = build_missile_model(MissileParams(delta_M_alpha=dma, h=h, tau_s=tau))
    tf = ss_to_tf(sys)
    s = 0.3 + 4j
    ref = state_space_resolvent(sys, s)
    assert abs(tf(s) - ref) <= 1e-9 * max(1.0, abs(ref))
    np.testing.assert_allclose(tf.den, np.real(np.poly(sys.A)), rtol=1e-9, atol=1e-9)
