import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from calfib.core import (
    DiffConfig,
    DomainError,
    FormEvaluator,
    MOMENT_TO_BASE,
    SingularJacobian,
    TorusAction,
    complex_hessian,
    contract,
    derivative,
    exterior_derivative_residual,
    exterior_derivative_values,
    flow_field,
    gram_schmidt,
    moment_residual,
    newton_solve,
    to_complex,
    to_real,
)
from calfib.models import make_eguchi_hanson, make_flat

W2 = TorusAction([[1, -1]])


# ---- views ---------------------------------------------------------------

@settings(max_examples=100)
@given(arrays(np.float64, 6, elements=st.floats(-1e6, 1e6)))
def test_real_complex_round_trip_is_exact(x):
    assert np.array_equal(to_real(to_complex(x)), x)


# ---- config ----------------------------------------------------------------

@pytest.mark.parametrize("kw", [{"h": 0}, {"h": -1e-3}, {"newton_tol": 0}, {"richardson": -1}, {"newton_maxiter": 0}])
def test_diffconfig_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        DiffConfig(**kw)


# ---- flow fields -------------------------------------------------------------

def test_flow_field_examples():
    assert np.allclose(to_complex(flow_field(W2, [1], to_real([1, 1]))), [1j, -1j])
    assert np.allclose(to_complex(flow_field(W2, [1], to_real([0, 2]))), [0, -2j])
    assert not np.any(flow_field(W2, [0], to_real([0.3 + 1j, 2])))


def test_flow_field_dimension_mismatch():
    with pytest.raises(ValueError):
        flow_field(W2, [1, 2], to_real([1, 1]))


def test_flow_field_is_derivative_of_action(rng):
    act = TorusAction([[1, 0, -1], [0, 1, -1]])
    x, v = rng.normal(size=6), rng.normal(size=2)
    fd = derivative(lambda t: act.exp_action(t[0] * v, x), np.zeros(1), np.ones(1))
    assert np.allclose(fd, act.flow_field(v, x), atol=1e-9)


def test_torus_action_validation():
    with pytest.raises(ValueError):
        TorusAction([[1, -1], [2, -2]])  # rank 1
    with pytest.raises(ValueError):
        TorusAction([[2, -2]])  # -1 acts trivially
    with pytest.raises(ValueError):
        TorusAction([[0.5, 1]])


def test_rank_drops_on_stabilized_points():
    act = TorusAction([[1, 0, -1], [0, 1, -1]])
    assert act.rank_at(to_real([0, 0, 1])) == 1
    assert act.is_regular(to_real([1, 1, 1]))


# ---- forms -------------------------------------------------------------------

def test_contract_example_and_zero_field():
    M = make_flat(2)
    X = lambda x: M.flow_field([1], x)
    form = contract(M.phi_form, [X])
    x = to_real([1, 1])
    assert np.isclose(form(x, to_real([1, 0])), 1j)
    zero = contract(M.phi_form, [lambda x: np.zeros(4)])
    assert zero(x, to_real([1, 0])) == 0


def test_full_contraction_and_overflow(rng):
    M = make_flat(2)
    X1, X2 = rng.normal(size=(2, 4))
    x = rng.normal(size=4)
    full = contract(M.phi_form, [lambda y: X1, lambda y: X2])
    assert full.degree == 0
    assert full(x) == M.phi(x, X1, X2)
    with pytest.raises(ValueError):
        contract(M.phi_form, [lambda y: X1] * 3)


def test_exterior_derivative_examples():
    M = make_flat(2)
    pp = contract(M.phi_form, [lambda x: M.flow_field([1], x)])
    assert exterior_derivative_residual(pp, to_real([0.4 + 0.1j, -0.7j])) < 1e-8
    dx1 = FormEvaluator(1, lambda x, u: u[0])
    assert exterior_derivative_residual(dx1, np.array([0.2, 0.5, 1.0, -1.0])) < 1e-14
    # |z1|^2 dx_1 with x_1 = Im z1: d = 2 x_0 dx_0 ^ dx_1, equal to 2 at z = (1, 0)
    bad = FormEvaluator(1, lambda x, u: (x[0] ** 2 + x[1] ** 2) * u[1])
    assert exterior_derivative_residual(bad, to_real([1, 0])) > 1.0


def test_exterior_derivative_of_polynomial_form_is_exact():
    # alpha = x0^2 x1 dx2  =>  d alpha = 2 x0 x1 dx0^dx2 + x0^2 dx1^dx2
    form = FormEvaluator(1, lambda x, u: x[0] ** 2 * x[1] * u[2])
    x = np.array([0.7, -1.3, 0.4])
    vals = exterior_derivative_values(form, x, DiffConfig(richardson=2))
    assert abs(vals[(0, 2)] - 2 * 0.7 * -1.3) < 1e-9
    assert abs(vals[(1, 2)] - 0.49) < 1e-9
    assert abs(vals[(0, 1)]) < 1e-12


def test_richardson_reproduces_polynomial_derivative():
    f = lambda x: x[0] ** 5 - 3 * x[0] ** 2 * x[1] ** 3
    x, u = np.array([1.1, -0.4]), np.array([0.3, 0.8])
    exact = 5 * 1.1**4 * 0.3 - 3 * (2 * 1.1 * 0.3 * (-0.4) ** 3 + 1.1**2 * 3 * 0.16 * 0.8)
    assert abs(derivative(f, x, u, DiffConfig(richardson=2)) - exact) < 1e-9


def test_complex_hessian_of_polynomial():
    # F = |z1|^2 |z2|^2 + Re(z1^2 zbar2)
    def F(x):
        z = to_complex(x)
        return abs(z[0]) ** 2 * abs(z[1]) ** 2 + (z[0] ** 2 * np.conj(z[1])).real

    z = np.array([0.3 + 0.2j, -0.5 + 0.7j])
    H = complex_hessian(F, to_real(z), DiffConfig(h=1e-2))
    exact = np.array(
        [[abs(z[1]) ** 2, np.conj(z[0]) * z[1] + z[0]], [z[0] * np.conj(z[1]) + np.conj(z[0]), abs(z[0]) ** 2]]
    )
    # d/dz_j d/dzbar_k: the Re(z1^2 zbar2) term contributes (1/2) * 2 z1 to H[0,1]
    exact[0, 1] = np.conj(z[0]) * z[1] + z[0]
    exact[1, 0] = np.conj(exact[0, 1])
    assert np.max(np.abs(H - exact)) < 1e-9


def test_forms_are_alternating(rng):
    M = make_eguchi_hanson(1.0)
    x = to_real([0.8 + 0.1j, -0.3 + 0.9j])
    u, v = rng.normal(size=(2, 4))
    assert abs(M.omega(x, u, v) + M.omega(x, v, u)) < 1e-12
    assert abs(M.phi(x, u, v) + M.phi(x, v, u)) < 1e-12


# ---- moment maps ---------------------------------------------------------------

def test_moment_residual_zero_generator_is_exact():
    assert moment_residual(make_flat(2), [0.0], to_real([1, 2])) == 0.0


def test_moment_residual_flat(rng):
    M = make_flat(2)
    cfg = DiffConfig(h=1e-5, richardson=0)
    for _ in range(100):
        x, v = rng.normal(size=4), rng.normal(size=1)
        assert moment_residual(M, v, x, cfg) < 1e-6


def test_moment_residual_eguchi_hanson(rng):
    M = make_eguchi_hanson(1.0)
    for _ in range(20):
        d = rng.normal(size=4)
        x = d / np.linalg.norm(d) * math.sqrt(rng.uniform(0.5, 5))
        assert moment_residual(M, rng.normal(size=1), x) < 1e-5


def test_moment_residual_rejects_stencil_outside_domain():
    with pytest.raises(DomainError):
        moment_residual(make_eguchi_hanson(1.0), [1.0], np.array([1e-4, 0, 0, 0]))


def test_moment_to_base_factor():
    M = make_flat(3)
    z = np.array([1 + 1j, 0.5, 2j])
    assert MOMENT_TO_BASE == -2.0
    assert np.allclose(M.base_moment(to_real(z)), np.abs(z[:2]) ** 2 - abs(z[2]) ** 2)


# ---- newton -------------------------------------------------------------------

def test_newton_example_converges_to_fiber():
    M = make_flat(2)
    res = newton_solve(M.alpha, to_real([1.1, 0.9]), [0, 1])
    assert np.max(np.abs(M.alpha(res.x) - [0, 1])) <= 1e-12


def test_newton_returns_start_when_converged():
    M = make_flat(2)
    x0 = to_real([1.3 + 0.2j, 0.4 - 1j])
    res = newton_solve(M.alpha, x0, M.alpha(x0))
    assert res.iterations == 0 and np.array_equal(res.x, x0)


def test_newton_detects_rank_deficiency_at_origin():
    M = make_flat(2)
    with pytest.raises(SingularJacobian):
        newton_solve(M.alpha, np.zeros(4), [0.1, 0.2])


def test_gram_schmidt_orthonormal_in_metric(rng):
    B = rng.normal(size=(4, 4))
    G = B @ B.T + np.eye(4)
    Q = np.array(gram_schmidt(list(rng.normal(size=(3, 4))), G))
    assert np.allclose(Q @ G @ Q.T, np.eye(3), atol=1e-12)
