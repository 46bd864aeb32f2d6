import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from poisson_rigidity import ce_complex as ce
from poisson_rigidity import liealg
from poisson_rigidity import momentum as mm
from poisson_rigidity.backends import make_backend
from poisson_rigidity.errors import HomotopyConditioningError, NotSemisimpleError
from poisson_rigidity.poisson import PoissonStructure, koszul_coef, poisson_bracket
from poisson_rigidity.fields import ScalarField
from conftest import random_oneform_coef, random_scalar_coef


@pytest.fixture(scope="module")
def sphere_ctx():
    b = make_backend("sphere2", 8)
    pi = mm.sphere_poisson(b)
    M = mm.so3_sphere_momentum(b)
    return b, pi, M, ce.build_context(pi, M)


@pytest.fixture(scope="module")
def torus_ctx():
    b = make_backend("torus2", 6)
    pi = PoissonStructure.constant(b, 1.0)
    M = mm.torus_translation_momentum(b)
    return b, pi, M, ce.build_context(pi, M)


def test_rho_examples(torus_ctx, sphere_ctx, rng):
    b, pi, M, ctx = torus_ctx
    assert np.max(np.abs(ce.rho(ctx, [1.0, 0.0], M.forms[1]))) <= 1e-14
    b, pi, M, ctx = sphere_ctx
    X = rng.standard_normal(3)
    assert np.max(np.abs(ce.rho(ctx, X, X @ M.forms))) <= 1e-12


def test_representation_identity(sphere_ctx, rng):
    b, pi, M, ctx = sphere_ctx
    beta = random_oneform_coef(b, rng, 4)
    e = np.eye(3)
    lhs = ce.rho(ctx, e[0], ce.rho(ctx, e[1], beta)) - ce.rho(ctx, e[1], ce.rho(ctx, e[0], beta))
    assert np.linalg.norm(lhs - ce.rho(ctx, e[2], beta)) <= 1e-7


def test_d0_basics(torus_ctx, sphere_ctx, rng):
    b, pi, M, ctx = torus_ctx
    assert not ce.d0(ctx, np.zeros(b.n1)).any()
    assert np.max(np.abs(ce.d0(ctx, M.forms[0]))) <= 1e-14
    b, pi, M, ctx = sphere_ctx
    F = random_scalar_coef(b, rng, 4)
    H = mm.so3_sphere_hamiltonians(b)
    got = ce.d0(ctx, b.d0(F))
    for i in range(3):
        expected = b.d0(poisson_bracket(pi, H.hamiltonian(i), ScalarField(b, F)).coef)
        assert_allclose(got[i], expected, atol=1e-10)


def test_complex_identities(sphere_ctx):
    res = ce.complex_residuals(sphere_ctx[3])
    assert res["d1d0"] <= 1e-8
    assert res["d2d1"] <= 1e-8


def test_d1_of_coboundary(sphere_ctx, rng):
    b, pi, M, ctx = sphere_ctx
    v = random_oneform_coef(b, rng, 4)
    assert np.max(np.abs(ce.d1(ctx, ce.d0(ctx, v)))) <= 1e-8 * np.abs(v).max()


def test_d1_of_difference_is_quadratic():
    b = make_backend("sphere2", 12)
    pi = mm.sphere_poisson(b)
    M = mm.so3_sphere_momentum(b)
    ctx = ce.build_context(pi, M)
    T = mm.perturb(pi, M, mm.random_scalar(b, np.random.default_rng(7)), 1e-2)
    beta = M.forms - T.forms
    got = ce.d1(ctx, beta)
    pairs = liealg.basis_pairs(3)
    expected = np.stack([koszul_coef(pi, beta[i], beta[j]) for i, j in pairs])
    assert np.max(np.abs(got - expected)) <= 1e-8


def test_abelian_d1_is_componentwise(torus_ctx, rng):
    b, pi, M, ctx = torus_ctx
    g = np.stack([random_oneform_coef(b, rng, 3) for _ in range(2)])
    expected = koszul_coef(pi, M.forms[0], g[1]) - koszul_coef(pi, M.forms[1], g[0])
    assert_allclose(ce.d1(ctx, g)[0], expected, atol=1e-12)


def test_d2_small_algebra_is_empty(torus_ctx):
    b, pi, M, ctx = torus_ctx
    assert ce.d2(ctx, np.zeros((1, b.n1))).shape == (0, b.n1)


def test_d2_matches_textbook_formula(sphere_ctx, rng):
    b, pi, M, ctx = sphere_ctx
    c = np.stack([random_oneform_coef(b, rng, 5) for _ in range(3)])
    assert_allclose(ce.d2(ctx, c), ce.d2_direct(pi, M, c), atol=1e-11)


def test_textbook_formula_degree_one(sphere_ctx, rng):
    b, pi, M, ctx = sphere_ctx
    g = np.stack([random_oneform_coef(b, rng, 5) for _ in range(3)])
    direct = ce.ce_differential_direct(lambda i, v: koszul_coef(pi, M.forms[i], v), g, 1,
                                       M.algebra.structure_constants)
    assert_allclose(ce.d1(ctx, g), direct, atol=1e-11)


def test_homotopy_identities(sphere_ctx, rng):
    b, pi, M, ctx = sphere_ctx
    for _ in range(5):
        g = rng.standard_normal((3, b.n1))
        assert ce.homotopy_residual(ctx, g) <= 1e-6
        c = rng.standard_normal((3, b.n1))
        assert ce.homotopy_residual2(ctx, c) <= 1e-6
    assert ce.homotopy_residual(ctx, np.zeros((3, b.n1))) == 0.0
    assert not ce.h0(ctx, np.zeros((3, b.n1))).any()


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_homotopy_identity_property(seed):
    b = make_backend("sphere2", 8)
    ctx = _cached_ctx()
    g = np.random.default_rng(seed).standard_normal((3, b.n1))
    assert ce.homotopy_residual(ctx, g) <= 1e-6


_CTX = {}


def _cached_ctx():
    if "ctx" not in _CTX:
        b = make_backend("sphere2", 8)
        _CTX["ctx"] = ce.build_context(mm.sphere_poisson(b), mm.so3_sphere_momentum(b))
    return _CTX["ctx"]


def test_pseudo_inverse_recovers_modulo_kernel(sphere_ctx, rng):
    b, pi, M, ctx = sphere_ctx
    v = rng.standard_normal(b.n1)
    diff = ce.h0(ctx, ce.d0(ctx, v)) - v
    assert np.max(np.abs(ce.d0(ctx, diff))) <= 1e-8


def test_norm_constants(sphere_ctx):
    rep = ce.homotopy_norm_constants(sphere_ctx[3])
    for k in range(4):
        assert 0 < rep["C"][2][k] < np.inf
    assert rep["fitted_s"] in (0, 1, 2, 3)
    # rotations preserve degree, so the loss is zero
    assert rep["fitted_s"] == 0


def test_casimir_check(sphere_ctx):
    rep = ce.casimir_homotopy_check(sphere_ctx[3])
    assert rep["casimir_identity_residual"] <= 1e-6
    assert rep["agreement_with_pinv"] <= 1e-5
    assert rep["invariant_cocycle_dim"] == 0


def test_casimir_needs_semisimple(torus_ctx):
    with pytest.raises(NotSemisimpleError, match="not semisimple"):
        ce.casimir_homotopy_check(torus_ctx[3])


def test_zero_model_collapses():
    b = make_backend("sphere2", 4)
    pi = mm.sphere_poisson(b)
    ctx = ce.build_context(pi, mm.MomentumMap1(liealg.so3(), b, np.zeros((3, b.n1))))
    with pytest.raises(HomotopyConditioningError) as info:
        ctx.H0
    assert info.value.smallest_singular_value == 0.0


def test_scalar_complex(sphere_ctx, rng):
    b, pi, M, ctx = sphere_ctx
    sctx = ce.build_scalar_context(pi, mm.so3_sphere_hamiltonians(b))
    res = ce.complex_residuals(sctx)
    assert res["d1d0"] <= 1e-8 and res["d2d1"] <= 1e-8
    # d of scalar cochains matches the 1-form complex on exact forms
    f = random_scalar_coef(b, rng, 4)
    assert_allclose(b.d0(ce.d0(sctx, f)), ce.d0(ctx, b.d0(f)), atol=1e-8)
    g = np.stack([random_scalar_coef(b, rng, 4) for _ in range(3)])
    assert_allclose(b.d0(ce.d1(sctx, g)), ce.d1(ctx, b.d0(g)), atol=1e-8)


def test_export(sphere_ctx, tmp_path):
    ctx = sphere_ctx[3]
    path = tmp_path / "ctx.npz"
    ctx.export(path)
    data = np.load(path)
    assert np.array_equal(data["D1"], ctx.D1)
    assert data["D0"].dtype == np.float64
