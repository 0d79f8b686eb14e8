import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynpg import bialgebroid as B
from dynpg.dynrmat import DynamicalR, TwoForm, perturb, regular_point, standard_r, zero_r
from dynpg.liealg import build_algebra
from dynpg.numerics import mat_exp, sample_rng, small_vector
from dynpg.pgroupoid import (BivectorX, CallableFunction, CoboundaryCocycle, GroupoidPoint, PolyFunction,
                             annihilator, coisotropy_generic, coisotropy_residual_X, cocycle_residual,
                             cocycle_skew_residual, dynamical_morphism_residual, graph_tangent_X, groupoid_axiom_residuals,
                             inverse, jacobi_bruteforce, jacobi_condition_residual, kernel_basis, linearized_formula,
                             multiply, poisson_bracket_X, poisson_bracket_terms, reduced_linearization,
                             unit, unit_and_coarse_brackets, unit_bivector)
from dynpg.residual import magnitude

seeds = st.integers(0, 2**32 - 1)

# (rank, Γ, linear two-form) covering empty and full Γ and a q-dependent C
MODELS = [(1, (0,), False), (1, (), False), (2, (0,), True), (2, (0, 1), False)]


def model(rank, gamma, linear, rng):
    g = build_algebra("A", rank)
    return DynamicalR(g, gamma, mu=rng.standard_normal(rank),
                      twoform=TwoForm.random_closed(rank, rng, linear and rank > 1))


def point(r, rng):
    g = r.algebra
    return GroupoidPoint(regular_point(r, rng), g.exp(small_vector(rng, g.dim)), regular_point(r, rng))


def omega_params(g, rng):
    return (rng.standard_normal(g.dim), rng.standard_normal(g.rank),
            rng.standard_normal(g.rank), rng.standard_normal(g.rank))


@pytest.fixture(params=MODELS, ids=lambda m: f"A{m[0]}-gamma{''.join(map(str, m[1]))}")
def setup(request):
    rng = sample_rng(11, "pgroupoid", *map(str, request.param))
    r = model(*request.param, rng)
    return r, rng


# groupoid structure ------------------------------------------------------------

def test_unit_and_inverse_values(sl2):
    q = np.array([0.3])
    e = unit(q, 2)
    assert np.array_equal(e.p, q) and np.array_equal(e.q, q) and np.array_equal(e.x, np.eye(2))
    x = sl2.exp(np.array([0.1, 0.2, -0.3]))
    inv = inverse(GroupoidPoint(np.array([0.1]), x, np.array([0.2])))
    assert inv.p[0] == 0.2 and inv.q[0] == 0.1
    assert magnitude(inv.x @ x - np.eye(2)) <= 1e-14


@given(seeds)
def test_groupoid_axioms_exact(seed):
    g = build_algebra("A", 2)
    rng = np.random.default_rng(seed)
    p, q, s, t = (small_vector(rng, 2) for _ in range(4))
    xs = [g.exp(small_vector(rng, g.dim)) for _ in range(3)]
    a, b, c = GroupoidPoint(p, xs[0], q), GroupoidPoint(q, xs[1], s), GroupoidPoint(s, xs[2], t)
    for res in groupoid_axiom_residuals(a, b, c):
        assert res.passed, res


def test_product_with_inverse_is_unit_at_source(sl2):
    pt = GroupoidPoint(np.array([0.1]), sl2.exp(np.array([0.2, 0.1, 0.4])), np.array([-0.3]))
    out = multiply(pt, inverse(pt))
    assert np.array_equal(out.p, pt.p) and np.array_equal(out.q, pt.p)
    assert magnitude(out.x - np.eye(2)) <= 1e-14


def test_non_composable_pair_rejected(sl2):
    a = GroupoidPoint(np.array([0.0]), np.eye(2), np.array([0.1]))
    with pytest.raises(ValueError):
        multiply(a, a)


# test functions ------------------------------------------------------------------

def test_poly_partials_match_finite_differences(setup):
    r, rng = setup
    g = r.algebra
    f = PolyFunction.random(g.rank, g.n, rng)
    pt = point(r, rng)
    for exact, fd in zip(f.partials(pt, g), CallableFunction(f).partials(pt, g)):
        assert magnitude(exact - fd) <= 1e-7


# bracket ---------------------------------------------------------------------

def test_bracket_matches_term_by_term_sum(setup):
    r, rng = setup
    g = r.algebra
    biv = BivectorX(CoboundaryCocycle(r))
    for _ in range(5):
        f, h = (PolyFunction.random(g.rank, g.n, rng) for _ in range(2))
        pt = point(r, rng)
        assert abs(poisson_bracket_X(f, h, pt, biv) - poisson_bracket_terms(f, h, pt, r)) <= 1e-10


def test_bracket_antisymmetric(setup):
    r, rng = setup
    g = r.algebra
    biv = BivectorX(CoboundaryCocycle(r))
    f, h = (PolyFunction.random(g.rank, g.n, rng) for _ in range(2))
    pt = point(r, rng)
    assert abs(poisson_bracket_X(f, h, pt, biv) + poisson_bracket_X(h, f, pt, biv)) <= 1e-12


def test_polarity_source_against_target(setup):
    r, rng = setup
    g = r.algebra
    biv = BivectorX(CoboundaryCocycle(r))
    for _ in range(5):
        f = PolyFunction.random_in(g.rank, g.n, rng, "p")
        h = PolyFunction.random_in(g.rank, g.n, rng, "q")
        assert abs(poisson_bracket_X(f, h, point(r, rng), biv)) <= 1e-10


def test_source_functions_bracket_through_cartan_only(setup):
    # h is abelian, so two functions of p commute
    r, rng = setup
    g = r.algebra
    biv = BivectorX(CoboundaryCocycle(r))
    f, h = (PolyFunction.random_in(g.rank, g.n, rng, "p") for _ in range(2))
    assert abs(poisson_bracket_X(f, h, point(r, rng), biv)) <= 1e-12


# Jacobi ------------------------------------------------------------------------

def test_jacobi_bruteforce_on_verified_models(setup):
    r, rng = setup
    g = r.algebra
    biv = BivectorX(CoboundaryCocycle(r))
    for _ in range(3):
        f, h, k = (PolyFunction.random(g.rank, g.n, rng) for _ in range(3))
        res = jacobi_bruteforce(f, h, k, point(r, rng), biv)
        assert res.value <= 1e-5, res


def test_jacobi_bruteforce_repeated_function_vanishes(sl2):
    rng = np.random.default_rng(4)
    r = DynamicalR(sl2, (0,))
    biv = BivectorX(CoboundaryCocycle(r))
    f, h = (PolyFunction.random(1, 2, rng) for _ in range(2))
    assert jacobi_bruteforce(f, f, h, point(r, rng), biv).value <= 1e-6


def test_jacobi_bruteforce_detects_perturbed_r(sl2):
    rng = np.random.default_rng(5)
    r = DynamicalR(sl2, (0,), mu=np.array([0.2]))
    bad = BivectorX(CoboundaryCocycle(perturb(r, 1e-2, rng)))
    worst = 0.0
    for _ in range(10):
        f, h, k = (PolyFunction.random(1, 2, rng) for _ in range(3))
        worst = max(worst, jacobi_bruteforce(f, h, k, point(r, rng), bad).value)
    assert worst >= 1e-4


def test_jacobi_condition_on_verified_models(setup):
    r, rng = setup
    coc = CoboundaryCocycle(r)
    for _ in range(5):
        assert jacobi_condition_residual(point(r, rng), coc).value <= 1e-8


def test_jacobi_condition_at_unit(setup):
    r, rng = setup
    q = regular_point(r, rng)
    assert jacobi_condition_residual(unit(q, r.algebra.n), CoboundaryCocycle(r)).value <= 1e-8


def test_jacobi_condition_zero_cocycle(sl3):
    pt = GroupoidPoint(np.zeros(2), sl3.exp(np.full(sl3.dim, 0.1)), np.zeros(2))
    assert jacobi_condition_residual(pt, CoboundaryCocycle(zero_r(sl3))).value == 0.0


def test_jacobi_condition_detects_perturbed_r(sl2):
    rng = np.random.default_rng(6)
    r = DynamicalR(sl2, (0,))
    bad = CoboundaryCocycle(perturb(r, 1e-2, rng))
    assert max(jacobi_condition_residual(point(r, rng), bad).value for _ in range(5)) >= 1e-4


# cocycle -----------------------------------------------------------------------

def test_cocycle_identity_on_coboundary(setup):
    r, rng = setup
    g = r.algebra
    coc = CoboundaryCocycle(r)
    for _ in range(20):
        p, q, s = (regular_point(r, rng) for _ in range(3))
        x, y = (g.exp(small_vector(rng, g.dim)) for _ in range(2))
        assert cocycle_residual(coc, p, q, s, x, y).value <= 1e-9


def test_cocycle_trivial_arguments(sl2):
    coc = CoboundaryCocycle(DynamicalR(sl2, (0,)))
    q = np.array([0.2])
    assert cocycle_residual(coc, q, q, q, np.eye(2), np.eye(2)).value <= 1e-15


def test_cocycle_vanishes_on_units_and_is_skew(setup):
    r, rng = setup
    coc = CoboundaryCocycle(r)
    q = regular_point(r, rng)
    assert magnitude(coc(q, np.eye(r.algebra.n), q)) <= 1e-15
    assert cocycle_skew_residual(coc, point(r, rng)).passed


def test_cocycle_decomposition_recovers_dynamical_part(setup):
    r, rng = setup
    g = r.algebra
    coc = CoboundaryCocycle(r)
    q0 = regular_point(r, rng)
    l, pi = coc.decompose(q0)
    assert magnitude(l(q0)) <= 1e-15
    p, q = regular_point(r, rng), regular_point(r, rng)
    x = g.exp(small_vector(rng, g.dim))
    rebuilt = -l(p) + pi(x) + coc.conj(x, l(q))
    assert magnitude(rebuilt - coc(p, x, q)) <= 1e-10
    # l differs from R by the constant R(q0)
    assert magnitude(l(p) - (r.R(p) - r.R(q0))) <= 1e-12


# coisotropy of the multiplication graph ---------------------------------------------

def _graph_data(r, rng):
    g = r.algebra
    pt = point(r, rng)
    return pt, g.exp(small_vector(rng, g.dim)), regular_point(r, rng)


def test_graph_coisotropic(setup):
    r, rng = setup
    g = r.algebra
    biv = BivectorX(CoboundaryCocycle(r))
    for _ in range(5):
        pt, y, s = _graph_data(r, rng)
        assert coisotropy_residual_X(biv, pt, y, s, omega_params(g, rng), omega_params(g, rng)).value <= 1e-9


def test_graph_coisotropic_over_full_annihilator(setup):
    r, rng = setup
    g = r.algebra
    biv = BivectorX(CoboundaryCocycle(r))
    pt, y, s = _graph_data(r, rng)
    tangent = graph_tangent_X(pt, y, s, g)
    # conormal dimension = 3 (2r + dim) - (3r + 2 dim)
    assert annihilator(tangent).shape[1] == 3 * g.rank + g.dim
    blocks = [biv.matrix(pt), biv.matrix(GroupoidPoint(pt.q, y, s)), biv.matrix(GroupoidPoint(pt.p, pt.x @ y, s))]
    assert coisotropy_generic(blocks, tangent) <= 1e-9


def test_graph_coisotropy_zero_covector(sl2):
    rng = np.random.default_rng(7)
    r = DynamicalR(sl2, (0,))
    pt, y, s = _graph_data(r, rng)
    zero = (np.zeros(3), np.zeros(1), np.zeros(1), np.zeros(1))
    assert coisotropy_residual_X(BivectorX(CoboundaryCocycle(r)), pt, y, s, zero, omega_params(sl2, rng)).value == 0


def test_graph_coisotropy_detects_source_target_coupling(sl3):
    rng = np.random.default_rng(8)
    r = DynamicalR(sl3, (0,))
    bad = BivectorX(CoboundaryCocycle(r), cross=1e-2 * np.ones((2, 2)))
    worst = 0.0
    for _ in range(5):
        pt, y, s = _graph_data(r, rng)
        worst = max(worst, coisotropy_residual_X(bad, pt, y, s, omega_params(sl3, rng),
                                                 omega_params(sl3, rng)).value)
    assert worst >= 1e-3


# dynamical morphism -----------------------------------------------------------

@settings(max_examples=15)
@given(seeds)
def test_dynamical_morphism_vanishes_on_torus(seed):
    rng = np.random.default_rng(seed)
    r = model(2, (0,), True, rng)
    p = regular_point(r, rng)
    assert dynamical_morphism_residual(CoboundaryCocycle(r), rng.standard_normal(2), p).value <= 1e-8


def test_dynamical_morphism_identity(sl2):
    r = DynamicalR(sl2, (0,))
    assert dynamical_morphism_residual(CoboundaryCocycle(r), np.zeros(1), np.array([0.3])).value == 0.0


def test_dynamical_morphism_detects_non_equivariant_r(sl3):
    rng = np.random.default_rng(9)
    r = DynamicalR(sl3, (0,))
    bad = CoboundaryCocycle(perturb(r, 1e-2, rng))
    assert dynamical_morphism_residual(bad, np.array([0.7, -0.4]), np.array([0.1, 0.2])).value >= 1e-4


def test_standard_cocycle_torus_invariant(sl3):
    # constant standard R is Ad_h invariant
    coc = CoboundaryCocycle(standard_r(sl3))
    h = mat_exp(sl3.matrix(sl3.embed_h(np.array([0.3, -0.8]))))
    assert magnitude(coc(np.zeros(2), h, np.zeros(2))) <= 1e-12


# unit and coarse groupoids ------------------------------------------------------

def test_coarse_polarity(sl3):
    rng = np.random.default_rng(10)
    c1, c2 = rng.standard_normal(2), rng.standard_normal(2)
    f = lambda p, q: np.sin(c1 @ p) + (c1 @ p) ** 3
    h = lambda p, q: np.exp(c2 @ q)
    assert abs(unit_and_coarse_brackets("coarse", f, h, (small_vector(rng, 2), small_vector(rng, 2)), sl3)) <= 1e-12


def test_unit_bracket_linear_functions(sl3):
    rng = np.random.default_rng(12)
    c1, c2 = rng.standard_normal(2), rng.standard_normal(2)
    p = small_vector(rng, 2)
    f = lambda z, q: c1 @ q
    h = lambda z, q: c2 @ q
    expected = -p @ sl3.restrict_h(sl3.bracket(sl3.embed_h(c1), sl3.embed_h(c2)))
    assert abs(unit_and_coarse_brackets("hamiltonian-unit", f, h, (np.zeros(2), p), sl3) - expected) <= 1e-10


def test_unit_bracket_pairs_torus_with_dual(sl2):
    # {Z, p} pairing: f = Z, g = p gives +1
    f = lambda z, q: z[0]
    h = lambda z, q: q[0]
    assert abs(unit_and_coarse_brackets("hamiltonian-unit", f, h, (np.array([0.2]), np.array([0.4])), sl2) - 1) <= 1e-9


def test_unit_bivector_full_rank(setup):
    r, rng = setup
    g = r.algebra
    for _ in range(5):
        m = unit_bivector(g, small_vector(rng, g.rank))
        assert np.linalg.matrix_rank(m) == 2 * g.rank


def test_unknown_bracket_mode(sl2):
    with pytest.raises(ValueError):
        unit_and_coarse_brackets("other", lambda a, b: 0, lambda a, b: 0, (np.zeros(1), np.zeros(1)), sl2)


# reduction at (0, 1, 0) --------------------------------------------------------

@pytest.mark.parametrize("rank,gamma", [(1, ()), (1, (0,)), (2, ())])
def test_reduced_bracket_vanishes_and_linearizes(rank, gamma):
    g = build_algebra("A", rank)
    r = DynamicalR(g, gamma, mu=np.full(rank, 0.3))
    biv = BivectorX(CoboundaryCocycle(r))
    data = B.coboundary_data(r)
    basis = kernel_basis(g)
    zero = np.zeros(rank)
    for z1, a1 in basis:
        for z2, a2 in basis:
            val, lam_part, y_part = reduced_linearization(biv, z1, a1, z2, a2)
            assert abs(val) <= 1e-12
            lam_f, y_f = linearized_formula(biv.cocycle, z1, a1, z2, a2)
            assert magnitude(lam_part - lam_f, y_part - y_f) <= 1e-8
            s1 = B.PolySection.constant(np.concatenate([z1, a1]), rank)
            s2 = B.PolySection.constant(np.concatenate([z2, a2]), rank)
            dual = B.bracket_Astar(s1, s2, zero, data)
            assert magnitude(dual - np.concatenate([lam_part, y_part])) <= 1e-8


def test_reduced_linearization_zero_direction(sl2):
    r = DynamicalR(sl2, ())
    lam_f, y_f = linearized_formula(CoboundaryCocycle(r), np.zeros(1), np.zeros(3), np.zeros(1), np.zeros(3))
    assert magnitude(lam_f, y_f) == 0.0
