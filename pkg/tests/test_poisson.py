import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from poisson_rigidity import momentum as mm
from poisson_rigidity.backends import make_backend
from poisson_rigidity.errors import BackendMismatchError, FlowDivergenceError
from poisson_rigidity.fields import OneForm, ScalarField, d_scalar, vector_bracket
from poisson_rigidity.poisson import (
    FlowOperator,
    PoissonStructure,
    anchor,
    d_commutation_defect,
    default_steps,
    flow_oneform,
    flow_operator,
    flow_tolerance,
    koszul_bracket,
    koszul_bracket_cartan,
    koszul_coef,
    koszul_matrix,
    matrix_power,
    poisson_bracket,
    rk4_propagator,
    scalar_flow_matrix,
    twoform_flow_matrix,
)
from conftest import random_oneform_coef, random_scalar_coef


def nonconstant_pi(backend, rng):
    c = 0.3 * random_scalar_coef(backend, rng, max_degree=2, min_degree=1)
    c[0] = 1.0
    return PoissonStructure(ScalarField(backend, c))


def test_fast_bracket_matches_cartan_route(backend16, rng):
    pi = nonconstant_pi(backend16, rng)
    a = OneForm(backend16, random_oneform_coef(backend16, rng))
    c = OneForm(backend16, random_oneform_coef(backend16, rng))
    assert_allclose(koszul_bracket(pi, a, c).coef, koszul_bracket_cartan(pi, a, c).coef, atol=1e-10)


def test_bracket_antisymmetric(backend16, rng):
    pi = nonconstant_pi(backend16, rng)
    a, c = (random_oneform_coef(backend16, rng) for _ in range(2))
    assert_allclose(koszul_coef(pi, a, c), -koszul_coef(pi, c, a), atol=1e-12)


def test_symbolic_oracle_on_torus(rng):
    b = make_backend("torus2", 12)
    t1, t2 = sp.symbols("t1 t2")
    p = 1 + sp.sin(t1) * sp.cos(t2) / 2
    a = [sp.cos(t1 + t2), sp.sin(2 * t1)]
    c = [sp.sin(t2) * sp.cos(t1), sp.cos(t1 - t2)]
    xs = [t1, t2]

    def sharp(w):
        return [-p * w[1], p * w[0]]

    def lie(X, w):
        return [sum(X[j] * sp.diff(w[i], xs[j]) + w[j] * sp.diff(X[j], xs[i]) for j in range(2)) for i in range(2)]

    pair = p * (a[0] * c[1] - a[1] * c[0])
    la, lc = lie(sharp(a), c), lie(sharp(c), a)
    expected = [la[i] - lc[i] - sp.diff(pair, xs[i]) for i in range(2)]

    def grid(expr):
        return sp.lambdify((t1, t2), expr, "numpy")(b.theta1, b.theta2) * np.ones(b.n_grid)

    pi = PoissonStructure(ScalarField.from_values(b, grid(p)))
    A = OneForm.from_values(b, np.stack([grid(e) for e in a], -1))
    C = OneForm.from_values(b, np.stack([grid(e) for e in c], -1))
    got = koszul_bracket(pi, A, C).values()
    for i in range(2):
        assert_allclose(got[:, i], grid(expected[i]), atol=1e-11)


def test_coordinate_forms_commute_on_symplectic_torus():
    b = make_backend("torus2", 6)
    pi = PoissonStructure.constant(b, 1.0)
    M = mm.torus_translation_momentum(b)
    assert np.max(np.abs(koszul_coef(pi, M.forms[0], M.forms[1]))) <= 1e-14


def test_anchor_is_homomorphism(backend16, rng):
    pi = nonconstant_pi(backend16, rng)
    a = OneForm(backend16, random_oneform_coef(backend16, rng, 3))
    c = OneForm(backend16, random_oneform_coef(backend16, rng, 3))
    lhs = anchor(pi, koszul_bracket(pi, a, c)).values
    rhs = vector_bracket(anchor(pi, a), anchor(pi, c)).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-8


def test_exact_forms(backend16, rng):
    pi = nonconstant_pi(backend16, rng)
    F = ScalarField(backend16, random_scalar_coef(backend16, rng))
    G = ScalarField(backend16, random_scalar_coef(backend16, rng))
    lhs = koszul_bracket(pi, d_scalar(F), d_scalar(G)).coef
    rhs = d_scalar(poisson_bracket(pi, F, G)).coef
    assert np.linalg.norm(lhs - rhs) <= 1e-9


def test_jacobi(backend16, rng):
    pi = nonconstant_pi(backend16, rng)
    a, b_, c = (random_oneform_coef(backend16, rng, 4) for _ in range(3))
    br = lambda x, y: koszul_coef(pi, x, y)  # noqa: E731
    cyc = br(br(a, b_), c) + br(br(b_, c), a) + br(br(c, a), b_)
    assert np.max(np.abs(cyc)) <= 1e-7


def test_mismatched_backends_rejected():
    pi = PoissonStructure.constant(make_backend("torus2", 4))
    w = OneForm.zeros(make_backend("torus2", 5))
    with pytest.raises(BackendMismatchError):
        koszul_bracket(pi, w, w)


def test_default_steps():
    assert default_steps(1.0) == 64
    assert default_steps(-0.5) == 32
    assert default_steps(0.0) == 1


def test_matrix_power_matches_numpy(rng):
    S = rng.standard_normal((5, 5)) / 3
    for k in (0, 1, 2, 7, 16):
        assert_allclose(matrix_power(S, k), np.linalg.matrix_power(S, k), atol=1e-13)


def test_rk4_scalar_accuracy():
    P = rk4_propagator(np.array([[1.0]]), 1.0, 64)
    assert abs(P[0, 0] - np.e) <= 1e-8
    with pytest.raises(FlowDivergenceError), np.errstate(over="ignore", invalid="ignore"):
        rk4_propagator(np.array([[1e300]]), 1.0, 1)


@pytest.fixture(scope="module")
def torus_shear():
    b = make_backend("torus2", 10)
    pi = PoissonStructure.constant(b, 1.0)
    eps = 0.1
    K = ScalarField.from_function(b, lambda x, y: eps * np.sin(x))
    return b, pi, eps, flow_operator(pi, d_scalar(K), 1.0)


def test_shear_flow_is_pullback(torus_shear):
    # pi#(d(eps sin t1)) = eps cos t1 d/dt2, whose time-1 flow shifts t2 by eps cos t1
    b, pi, eps, F = torus_shear
    f = b.scalar_from_function(lambda x, y: np.cos(y) + np.sin(x + y))
    g = b.scalar_from_function(lambda x, y: np.sin(2 * y))
    out = b.synth1(F.apply_coef(np.concatenate([f, g])))
    x, y = b.theta1, b.theta2
    yy = y + eps * np.cos(x)
    ge = np.sin(2 * yy)
    assert_allclose(out[:, 0], np.cos(yy) + np.sin(x + yy) - eps * np.sin(x) * ge, atol=1e-10)
    assert_allclose(out[:, 1], ge, atol=1e-10)


def test_sphere_rotation_flow(sphere12):
    b = sphere12
    pi = mm.sphere_poisson(b)
    eps = 0.3
    z = b.coordinate_functions()[2]
    F = flow_operator(pi, OneForm(b, b.d0(eps * z)), 1.0)
    fn = lambda x, y, zz: x * zz + y**2  # noqa: E731
    c, s = np.cos(eps), np.sin(eps)
    rotated = b.scalar_from_function(lambda x, y, zz: fn(x * c + y * s, -x * s + y * c, zz))
    assert_allclose(F.apply_coef(b.d0(b.scalar_from_function(fn))), b.d0(rotated), atol=1e-10)


def test_operator_matches_vector_integration(rng):
    b = make_backend("sphere2", 8)
    pi = nonconstant_pi(b, rng)
    a = OneForm(b, 0.1 * random_oneform_coef(b, rng, 3))
    beta = OneForm(b, random_oneform_coef(b, rng, 3))
    F = flow_operator(pi, a, 0.7, 40)
    assert_allclose(F.apply(beta).coef, flow_oneform(pi, a, beta, 0.7, 40).coef, atol=1e-12)


def test_composition_law(sphere12):
    pi = mm.sphere_poisson(sphere12)
    K = mm.random_scalar(sphere12, np.random.default_rng(2))
    g = OneForm(sphere12, sphere12.d0(1e-2 * K.coef))
    F1 = flow_operator(pi, g, 1.0)
    Fa, Fb = flow_operator(pi, g, 0.3), flow_operator(pi, g, 0.7)
    assert np.max(np.abs(Fa.compose(Fb).matrix - F1.matrix)) <= 1e-6
    Fm = flow_operator(pi, g, -1.0)
    assert np.max(np.abs(F1.matrix @ Fm.matrix - np.eye(sphere12.n1))) <= 1e-6


def test_flow_tolerance_small(sphere8):
    pi = mm.sphere_poisson(sphere8)
    K = mm.random_scalar(sphere8, np.random.default_rng(4))
    A = koszul_matrix(pi, sphere8.d0(1e-2 * K.coef))
    assert 0 < flow_tolerance(A, 1.0, 64) < 1e-10


def test_closed_generator_commutes_with_d(sphere8):
    pi = mm.sphere_poisson(sphere8)
    K = mm.random_scalar(sphere8, np.random.default_rng(5))
    closed = OneForm(sphere8, sphere8.d0(0.05 * K.coef))
    assert d_commutation_defect(pi, closed, 1.0) <= 1e-10
    # a coexact generator is not closed, so the defect is visibly nonzero
    F, G = sphere8.hodge_potentials(closed.coef)
    coexact = OneForm(sphere8, sphere8.from_potentials(G, F))
    assert d_commutation_defect(pi, coexact, 1.0) > 1e-4


def test_twoform_flow_preserves_wedge(sphere12, rng):
    # Phi(a) ^ Phi(b) = Psi2(a ^ b) for a closed generator, up to truncation
    b = sphere12
    pi = mm.sphere_poisson(b)
    K = mm.random_scalar(b, np.random.default_rng(6))
    g = OneForm(b, b.d0(1e-2 * K.coef))
    F = flow_operator(pi, g, 1.0).matrix
    W = twoform_flow_matrix(pi, g, 1.0)
    a, c = (random_oneform_coef(b, rng, 2) for _ in range(2))

    def wedge(x, y):
        return b.analyze0(b.cross(b.synth1(x), b.synth1(y)))

    assert_allclose(wedge(F @ a, F @ c), W @ wedge(a, c), atol=1e-7)


def test_scalar_flow_is_pullback(sphere12):
    b = sphere12
    pi = mm.sphere_poisson(b)
    eps = 0.3
    z = b.coordinate_functions()[2]
    P = scalar_flow_matrix(pi, OneForm(b, b.d0(eps * z)), 1.0)
    c, s = np.cos(eps), np.sin(eps)
    fn = lambda x, y, zz: x * y + zz  # noqa: E731
    rotated = b.scalar_from_function(lambda x, y, zz: fn(x * c + y * s, -x * s + y * c, zz))
    assert_allclose(P @ b.scalar_from_function(fn), rotated, atol=1e-10)


def test_flow_operator_bytes_roundtrip(sphere8):
    pi = mm.sphere_poisson(sphere8)
    K = mm.random_scalar(sphere8, np.random.default_rng(1))
    F = flow_operator(pi, OneForm(sphere8, sphere8.d0(1e-2 * K.coef)), 1.0)
    blob = F.to_bytes()
    assert blob.startswith(b"FLOWOP ")
    assert np.array_equal(FlowOperator.matrix_from_bytes(blob), F.matrix)
    with pytest.raises(ValueError):
        FlowOperator.matrix_from_bytes(blob[:-8])
