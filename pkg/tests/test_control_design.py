import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import solve_continuous_are

from furuta_bench.control_design import (
    VENDOR_A,
    VENDOR_B,
    DESIGN_Q,
    DESIGN_R,
    LinearModel,
    care_residual,
    characteristic_polynomial,
    design_lqr,
    eigenvalues,
    is_hurwitz,
    lqr_gain,
    polynomial_roots,
    scalar_selftest,
    solve_care,
)
from furuta_bench.errors import CareError


@pytest.fixture(scope="module")
def vendor_design():
    return design_lqr(LinearModel.vendor(), DESIGN_Q, DESIGN_R)


@pytest.mark.parametrize("a, expected", [(0.0, 1.0), (-1.0, math.sqrt(2) - 1)])
def test_scalar_closed_form(a, expected):
    P = solve_care([[a]], [[1.0]], [[1.0]], [[1.0]])
    assert abs(P[0, 0] - expected) < 1e-10


def test_scalar_selftest_report():
    for case in scalar_selftest().values():
        assert abs(case["P"] - case["expected"]) < 1e-10
        assert case["K"] == pytest.approx(case["P"])


def test_vendor_design_residual_and_structure(vendor_design):
    P = vendor_design.P
    assert care_residual(VENDOR_A, VENDOR_B, DESIGN_Q, DESIGN_R, P) < 1e-8
    assert np.array_equal(P, P.T)
    assert np.linalg.eigvalsh(P).min() >= -1e-10
    assert is_hurwitz(VENDOR_A - np.outer(VENDOR_B, vendor_design.K))
    assert vendor_design.report()["hurwitz"] is True


def test_vendor_design_matches_scipy(vendor_design):
    ref = solve_continuous_are(VENDOR_A, VENDOR_B.reshape(4, 1), DESIGN_Q, np.array([[DESIGN_R]]))
    np.testing.assert_allclose(vendor_design.P, ref, rtol=1e-9, atol=1e-9)


def test_arm_gain_is_fixed_by_position_weight(vendor_design):
    # theta is a pure integrator state, so K[0] = -sqrt(Q[0][0] / R) for this model
    assert vendor_design.K[0] == pytest.approx(-math.sqrt(12.0), rel=1e-9)


def _riccati_flow_oracle(A, S, Q, tol=1e-9, max_steps=200_000):
    # plain RK4 on P' = A'P + PA - PSP + Q from P = Q, run until the flow settles
    def rhs(P):
        return A.T @ P + P @ A - P @ S @ P + Q

    P = Q.copy()
    for _ in range(max_steps):
        d = rhs(P)
        if np.linalg.norm(d) < tol:
            return P
        h = 1.0 / (2.0 * np.abs(np.linalg.eigvals(A - S @ P)).max() + 1.0)
        k1 = d
        k2 = rhs(P + 0.5 * h * k1)
        k3 = rhs(P + 0.5 * h * k2)
        k4 = rhs(P + h * k3)
        P = P + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    raise AssertionError("flow did not settle")


def test_settled_riccati_flow_agrees(vendor_design):
    S = np.outer(VENDOR_B, VENDOR_B) / DESIGN_R
    P = _riccati_flow_oracle(VENDOR_A, S, DESIGN_Q)
    np.testing.assert_allclose(P, vendor_design.P, rtol=1e-8, atol=1e-8)


def test_design_is_fast():
    start = time.perf_counter()
    design_lqr(LinearModel.vendor(), DESIGN_Q, DESIGN_R)
    assert time.perf_counter() - start < 1.0


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(0.1, 100.0))
def test_cost_scaling_covariance(scale):
    # scaling both Q and R leaves K unchanged and scales P
    P1 = solve_care(VENDOR_A, VENDOR_B, DESIGN_Q, DESIGN_R)
    P2 = solve_care(VENDOR_A, VENDOR_B, scale * DESIGN_Q, scale * DESIGN_R)
    np.testing.assert_allclose(P2, scale * P1, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(lqr_gain(VENDOR_A, VENDOR_B, scale * DESIGN_Q, scale * DESIGN_R, P2),
                               lqr_gain(VENDOR_A, VENDOR_B, DESIGN_Q, DESIGN_R, P1), rtol=1e-7, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_random_stabilizable_systems(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 5))
    A = r.normal(size=(n, n))
    B = r.normal(size=(n, 1))
    Q = np.eye(n)
    P = solve_care(A, B, Q, 1.0)
    assert care_residual(A, B, Q, 1.0, P) < 1e-8 * max(1.0, np.linalg.norm(P))
    assert np.allclose(P, P.T)
    assert is_hurwitz(A - B @ B.T @ P)
    ref = solve_continuous_are(A, B, Q, np.eye(1))
    assert np.linalg.norm(P - ref) < 1e-6 * max(1.0, np.linalg.norm(ref))


def test_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        solve_care(np.eye(3), np.ones(2), np.eye(3), 1.0)


def test_rejects_non_positive_r():
    with pytest.raises((ValueError, CareError)):
        solve_care(VENDOR_A, VENDOR_B, DESIGN_Q, 0.0)


def test_unstabilizable_system_raises():
    # an unstable mode the input cannot reach
    A = np.diag([1.0, -1.0])
    B = np.array([0.0, 1.0])
    with pytest.raises(CareError):
        solve_care(A, B, np.eye(2), 1.0)


@pytest.mark.parametrize("M, expected", [
    (np.diag([-1.0, -2.0]), True),
    (np.diag([-1.0, 0.0]), False),
    (np.array([[0.0, 1.0], [-1.0, 0.0]]), False),
    (np.array([[-0.1, 5.0], [-5.0, -0.1]]), True),
    (VENDOR_A, False),
])
def test_is_hurwitz_examples(M, expected):
    assert is_hurwitz(M) is expected


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_eigenvalues_agree_with_lapack(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 6))
    M = r.normal(size=(n, n)) * 3
    ours = list(eigenvalues(M))
    # match each reference eigenvalue to its nearest unused computed one
    for lam in np.linalg.eigvals(M):
        j = int(np.argmin([abs(lam - z) for z in ours]))
        assert abs(ours.pop(j) - lam) < 1e-6 * max(1.0, abs(lam))


def test_characteristic_polynomial_and_roots():
    M = np.array([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(characteristic_polynomial(M), [1.0, -4.0, 3.0])
    np.testing.assert_allclose(np.sort(polynomial_roots([1.0, -6.0, 11.0, -6.0]).real), [1.0, 2.0, 3.0])


def test_vendor_closed_loop_eigenvalues(vendor_design):
    ref = np.linalg.eigvals(VENDOR_A - np.outer(VENDOR_B, vendor_design.K))
    ours = list(vendor_design.closed_loop_eigenvalues)
    for lam in ref:
        j = int(np.argmin([abs(lam - z) for z in ours]))
        assert abs(ours.pop(j) - lam) < 1e-8 * abs(lam)


def test_linear_model_round_trip():
    m = LinearModel.vendor()
    m2 = LinearModel.from_dict(m.to_dict())
    assert np.array_equal(m.A, m2.A) and np.array_equal(m.B, m2.B)
