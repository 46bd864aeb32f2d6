import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from poisson_rigidity import fields as fl
from poisson_rigidity.backends import make_backend
from poisson_rigidity.errors import BackendMismatchError
from conftest import random_oneform_coef, random_scalar_coef

t1, t2 = sp.symbols("t1 t2")
F_EXPR = sp.sin(t1) * sp.cos(2 * t2) + sp.cos(3 * t1 - t2)
G_EXPR = sp.cos(t1 + t2) + sp.sin(2 * t2) ** 2
P_EXPR = sp.sin(2 * t1 - t2)
Q_EXPR = sp.cos(t1) + sp.sin(t1 + 2 * t2)


def grid(torus, expr):
    return sp.lambdify((t1, t2), expr, "numpy")(torus.theta1, torus.theta2) * np.ones(torus.n_grid)


@pytest.fixture(scope="module")
def torus():
    return make_backend("torus2", 12)


def test_lie_derivative_matches_symbolic(torus):
    w = fl.OneForm.from_values(torus, np.stack([grid(torus, F_EXPR), grid(torus, G_EXPR)], -1))
    X = fl.VectorField(torus, np.stack([grid(torus, P_EXPR), grid(torus, Q_EXPR)], -1))
    comps = [F_EXPR, G_EXPR]
    Xs = [P_EXPR, Q_EXPR]
    xs = [t1, t2]
    # (L_X w)_i = X^j d_j w_i + w_j d_i X^j
    expected = [sum(Xs[j] * sp.diff(comps[i], xs[j]) + comps[j] * sp.diff(Xs[j], xs[i]) for j in range(2))
                for i in range(2)]
    got = fl.lie_derivative(X, w).values()
    for i in range(2):
        assert_allclose(got[:, i], grid(torus, expected[i]), atol=1e-11)


def test_vector_bracket_matches_symbolic(torus):
    X = fl.VectorField(torus, np.stack([grid(torus, P_EXPR), grid(torus, Q_EXPR)], -1))
    Y = fl.VectorField(torus, np.stack([grid(torus, F_EXPR), grid(torus, G_EXPR)], -1))
    Xs, Ys, xs = [P_EXPR, Q_EXPR], [F_EXPR, G_EXPR], [t1, t2]
    expected = [sum(Xs[j] * sp.diff(Ys[i], xs[j]) - Ys[j] * sp.diff(Xs[i], xs[j]) for j in range(2))
                for i in range(2)]
    got = fl.vector_bracket(X, Y).values
    for i in range(2):
        assert_allclose(got[:, i], grid(torus, expected[i]), atol=1e-11)


def test_exterior_derivative_of_oneform(torus):
    w = fl.OneForm.from_values(torus, np.stack([grid(torus, F_EXPR), grid(torus, G_EXPR)], -1))
    expected = sp.diff(G_EXPR, t1) - sp.diff(F_EXPR, t2)
    assert_allclose(fl.d_oneform(w).values(), grid(torus, expected), atol=1e-11)


def test_wedge_and_contract(torus):
    a = fl.d_scalar(fl.ScalarField.from_function(torus, lambda x, y: np.sin(x)))
    b = fl.d_scalar(fl.ScalarField.from_function(torus, lambda x, y: np.sin(y)))
    # d sin t1 ^ d sin t2 = cos t1 cos t2 dt1^dt2
    assert_allclose(fl.wedge11(a, b).values(), np.cos(torus.theta1) * np.cos(torus.theta2), atol=1e-13)
    X = fl.VectorField(torus, np.stack([np.ones(torus.n_grid), np.zeros(torus.n_grid)], -1))
    rho = fl.TwoForm(torus, fl.ScalarField.constant(torus, 1.0).coef)
    # i_{d1}(dt1 ^ dt2) = dt2
    assert_allclose(fl.contract(X, rho).values(), np.stack([np.zeros(torus.n_grid), np.ones(torus.n_grid)], -1),
                    atol=1e-14)
    assert_allclose(fl.contract(X, a).values(), np.cos(torus.theta1), atol=1e-13)
    with pytest.raises(TypeError):
        fl.contract(X, fl.ScalarField.constant(torus))


def test_cartan_identity_on_sphere(sphere12, rng):
    # L_X dF = d(X F)
    F = fl.ScalarField(sphere12, random_scalar_coef(sphere12, rng, max_degree=3))
    G = fl.ScalarField(sphere12, random_scalar_coef(sphere12, rng, max_degree=3))
    X = fl.VectorField(sphere12, sphere12.rot(fl.d_scalar(G).values()))
    lhs = fl.lie_derivative(X, fl.d_scalar(F))
    rhs = fl.d_scalar(fl.apply_vector(X, F))
    assert_allclose(lhs.coef, rhs.coef, atol=1e-11)


def test_arithmetic_and_mismatch(rng):
    a = make_backend("torus2", 4)
    b = make_backend("torus2", 5)
    f = fl.ScalarField(a, random_scalar_coef(a, rng))
    g = fl.ScalarField(b, random_scalar_coef(b, rng))
    assert_allclose((2 * f - f).coef, f.coef)
    assert_allclose((-f).coef, -f.coef)
    with pytest.raises(BackendMismatchError):
        f + g
    with pytest.raises(ValueError):
        fl.ScalarField(a, np.zeros(3))
    assert not fl.OneForm.zeros(a).coef.any()


def test_fields_are_immutable(torus):
    f = fl.ScalarField.constant(torus, 2.0)
    with pytest.raises(ValueError):
        f.coef[0] = 1.0


def test_vector_field_tangency_check(sphere8):
    with pytest.raises(ValueError, match="tangent"):
        fl.VectorField(sphere8, sphere8.normal)


def test_sobolev_norms_and_smoothing(sphere12, rng):
    c = random_scalar_coef(sphere12, rng, max_degree=12)
    f = fl.ScalarField(sphere12, c)
    assert_allclose(fl.sobolev_norm(f, 0), np.linalg.norm(c))
    assert fl.sobolev_norm(f, 2) >= fl.sobolev_norm(f, 1) >= fl.sobolev_norm(f, 0)
    low = fl.smooth(f, 4)
    assert np.all(low.coef[sphere12.deg0 > 4] == 0)
    assert np.array_equal(fl.smooth(f, 12).coef, f.coef)
    with pytest.raises(ValueError):
        fl.smooth(f, -1)
    with pytest.raises(ValueError):
        fl.sobolev_norm(f, -1)
    # H^1 norm of a degree-l harmonic
    e = np.zeros(sphere12.n0)
    e[5] = 1.0
    lam = sphere12.lam0[5]
    assert_allclose(fl.sobolev_norm(fl.ScalarField(sphere12, e), 1), np.sqrt(1 + lam))


def test_hodge_helpers(sphere8, rng):
    w = fl.OneForm(sphere8, random_oneform_coef(sphere8, rng, max_degree=5))
    F, G = fl.hodge_decompose(w)
    assert_allclose(fl.hodge_assemble(F, G).coef, w.coef, atol=1e-13)
    with pytest.raises(ValueError):
        fl.hodge_decompose(fl.OneForm.zeros(make_backend("torus2", 3)))


@pytest.mark.parametrize("kind", ["torus2", "sphere2"])
def test_serialization_roundtrip(kind, rng):
    b = make_backend(kind, 5)
    for obj in (fl.ScalarField(b, random_scalar_coef(b, rng)), fl.OneForm(b, random_oneform_coef(b, rng)),
                fl.TwoForm(b, random_scalar_coef(b, rng))):
        back = fl.loads_field(fl.dumps_field(obj))
        assert type(back) is type(obj)
        assert back.backend is b
        assert np.array_equal(back.coef, obj.coef)
