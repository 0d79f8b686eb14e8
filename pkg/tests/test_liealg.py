import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from dynpg.errors import UnsupportedInputError
from dynpg.liealg import RootSystem, build_algebra, cartan_matrix
from dynpg.numerics import central, mat_exp

seeds = st.integers(0, 2**32 - 1)
ranks = st.sampled_from([1, 2, 3])


def algebra(rank):
    return build_algebra("A", rank)


def sample(seed, g, count=2):
    r = np.random.default_rng(seed)
    return [r.standard_normal(g.dim) + 1j * r.standard_normal(g.dim) for _ in range(count)]


# construction --------------------------------------------------------------------

def test_sl2_shape(sl2):
    assert sl2.n_roots == 2 and sl2.dim == 3


def test_sl3_shape_and_structure_constant(sl3):
    assert sl3.n_roots == 6 and sl3.dim == 8
    a1, a2 = sl3.rootsystem.simple
    assert abs(sl3.N[(a1, a2)]) > 0.1


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_root_count_and_symmetry(rank):
    rs = RootSystem.build("A", rank)
    n = rank + 1
    assert len(rs.roots) == n * (n - 1)
    assert np.array_equal(rs.roots[rs.negative], -rs.roots[rs.positive])
    assert not np.any(np.all(rs.roots == 0, axis=1))
    pair = rs.pairing_matrix()
    assert np.array_equal(pair, pair.T) and np.all(np.linalg.eigvalsh(pair) > 0)


def test_chevalley_cartan_element_killing_norm(sl2):
    # h = E11 - E22 before any rescaling: tr(ad_h ad_h) = 8
    h = sl2.coords(np.diag([1.0, -1.0]))
    assert abs(np.trace(sl2.ad(h) @ sl2.ad(h)) - 8) <= 1e-12


def test_unsupported_series():
    with pytest.raises(UnsupportedInputError):
        build_algebra("B", 2)
    with pytest.raises(UnsupportedInputError):
        cartan_matrix("A", 0)


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_structure_tensor_residuals(rank):
    g = algebra(rank)
    assert g.jacobi_residual() <= 1e-12
    assert g.antisymmetry_residual() <= 1e-12
    assert g.killing_invariance_residual() <= 1e-12
    assert g.normalization_residual() <= 1e-12


# bracket and Killing form ----------------------------------------------------------

@given(seeds, ranks)
def test_bracket_self_vanishes(seed, rank):
    g = algebra(rank)
    x, = sample(seed, g, 1)
    assert np.max(np.abs(g.bracket(x, x))) <= 1e-12


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_root_vectors_bracket_to_coroot(rank):
    g = algebra(rank)
    rs = g.rootsystem
    for k in range(g.n_roots):
        e = np.eye(g.dim)[g.root_basis_index(k)]
        f = np.eye(g.dim)[g.root_basis_index(rs.negate(k))]
        assert np.max(np.abs(g.bracket(e, f) - g.h_root(k))) <= 1e-12


@given(seeds)
def test_bracket_matches_matrix_commutator(seed):
    g = algebra(2)
    x, y = sample(seed, g)
    mx, my = g.matrix(x), g.matrix(y)
    assert np.max(np.abs(g.matrix(g.bracket(x, y)) - (mx @ my - my @ mx))) <= 1e-12


@given(seeds, ranks)
def test_sharp_flat_inverse_and_pairing(seed, rank):
    g = algebra(rank)
    xi, y = sample(seed, g)
    assert np.max(np.abs(g.flat(g.sharp(xi)) - xi)) <= 1e-12
    assert abs(g.killing_form(g.sharp(xi), y) - xi @ y) <= 1e-12


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_killing_pairs_opposite_roots_only(rank):
    g = algebra(rank)
    rs = g.rootsystem
    for k in range(g.n_roots):
        for l in range(g.n_roots):
            val = g.killing[g.root_basis_index(k), g.root_basis_index(l)]
            assert abs(val - (1.0 if l == rs.negate(k) else 0.0)) <= 1e-12
    assert np.max(np.abs(g.killing[:rank, :rank] - np.eye(rank))) <= 1e-12


@given(seeds)
def test_killing_equals_adjoint_trace(seed):
    g = algebra(1)
    x, y = sample(seed, g)
    adjoint = np.trace(g.ad(x) @ g.ad(y))
    assert abs(g.killing_form(x, y) - adjoint) <= 1e-12
    assert abs(g.killing_form(x, y) - 2 * g.n * np.trace(g.matrix(x) @ g.matrix(y))) <= 1e-12


# adjoint and coadjoint actions ------------------------------------------------------

def test_Ad_of_identity(sl3):
    assert np.max(np.abs(sl3.Ad(np.eye(3)) - np.eye(8))) <= 1e-13


@given(seeds, ranks)
def test_coadjoint_is_minus_dual(seed, rank):
    g = algebra(rank)
    x, y, xi = sample(seed, g, 3)
    assert abs((g.coad(x) @ xi) @ y + xi @ (g.ad(x) @ y)) <= 1e-12


@given(seeds, ranks)
def test_Ad_is_homomorphism(seed, rank):
    g = algebra(rank)
    x, y = (0.5 * v for v in sample(seed, g))
    X, Y = g.exp(x), g.exp(y)
    assert np.max(np.abs(g.Ad(X @ Y) - g.Ad(X) @ g.Ad(Y))) <= 1e-10


@given(seeds, ranks)
def test_Ad_of_exp_is_exp_of_ad(seed, rank):
    g = algebra(rank)
    x, = (0.5 * v for v in sample(seed, g, 1))
    assert np.max(np.abs(g.Ad(g.exp(x)) - scipy.linalg.expm(g.ad(x)))) <= 1e-10


@given(seeds)
def test_Ad_derivative_is_ad(seed):
    g = algebra(2)
    x, = sample(seed, g, 1)
    d = central(lambda t: g.Ad(mat_exp(t * g.matrix(x))))
    assert np.max(np.abs(d - g.ad(x))) <= 1e-7 * max(1.0, np.max(np.abs(g.ad(x))))


@given(seeds)
def test_coAd_is_dual_of_inverse_Ad(seed):
    g = algebra(2)
    x, = (0.5 * v for v in sample(seed, g, 1))
    X = g.exp(x)
    assert np.max(np.abs(g.coAd(X) - g.Ad(np.linalg.inv(X)).T)) <= 1e-12


@given(seeds)
def test_cartan_coadjoint_flow_fixes_cartan_covectors(seed):
    g = algebra(2)
    r = np.random.default_rng(seed)
    z, q = r.standard_normal(g.rank), r.standard_normal(g.rank)
    iz = g.embed_h(z)
    # finite difference of the coadjoint flow of exp(tZ) against the closed form
    flow = central(lambda t: g.restrict_h(g.coAd(mat_exp(t * g.matrix(iz))) @ g.embed_h(q)))
    assert np.max(np.abs(flow)) <= 1e-9
    assert np.max(np.abs(g.restrict_h(g.coad(iz) @ g.embed_h(q)))) <= 1e-12


@pytest.mark.parametrize("rank", [2, 3])
def test_structure_constants_antisymmetric(rank):
    g = algebra(rank)
    for (k, l), val in g.N.items():
        assert abs(val + g.N[(l, k)]) <= 1e-12
