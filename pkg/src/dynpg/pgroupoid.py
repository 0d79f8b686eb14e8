"""The trivial groupoid U×G×U and its coboundary dynamical Poisson structure.

Cotangent vectors at (p, x, q) are written in the frame (δ₁, D, δ₂):
δ₁f, δ₂f ∈ h are the partial derivatives in p and q, and Df ∈ g* is the
right-trivialized gradient, ⟨Df, X⟩ = d/dt f(p, e^{tX}x, q).  The left
gradient is D′f = Ad_x^T Df.  A Poisson bivector is then a square matrix M
on (h ⊕ g* ⊕ h) with {f, g} = df^T M dg.
"""
from dataclasses import dataclass

import numpy as np

from ._kernels import poly_eval_grad
from .dynrmat import RMatrix
from .numerics import DEFAULT_FD_STEP, central, curve_derivative, mat_exp
from .residual import Residual, magnitude, serialize_point


@dataclass(frozen=True, eq=False)
class GroupoidPoint:
    p: np.ndarray
    x: np.ndarray
    q: np.ndarray

    def shifted(self, dp=None, left=None, dq=None, right=None):
        p = self.p if dp is None else self.p + dp
        q = self.q if dq is None else self.q + dq
        x = self.x
        if left is not None:
            x = left @ x
        if right is not None:
            x = x @ right
        return GroupoidPoint(p, x, q)

    def as_point(self):
        return serialize_point(p=self.p, x=self.x, q=self.q)


# --------------------------------------------------------------------------
# groupoid structure

def source(pt):
    return pt.p


def target(pt):
    return pt.q


def unit(q, n):
    return GroupoidPoint(np.asarray(q), np.eye(n, dtype=np.complex128), np.asarray(q))


def inverse(pt):
    return GroupoidPoint(pt.q, np.linalg.inv(pt.x), pt.p)


def multiply(a, b):
    if magnitude(a.q - b.p) > 1e-12:
        raise ValueError("points are not composable")
    return GroupoidPoint(a.p, a.x @ b.x, b.q)


def groupoid_axiom_residuals(a, b, c, tol=1e-12):
    """Associativity, unit and inverse laws on a composable triple."""
    n = a.x.shape[0]

    def gap(u, v):
        return magnitude(u.p - v.p, u.x - v.x, u.q - v.q)

    out = [
        Residual("groupoid.associativity",
                 gap(multiply(multiply(a, b), c), multiply(a, multiply(b, c))), tol),
        Residual("groupoid.left_unit", gap(multiply(unit(a.p, n), a), a), tol),
        Residual("groupoid.right_unit", gap(multiply(a, unit(a.q, n)), a), tol),
        Residual("groupoid.inverse", gap(multiply(a, inverse(a)), unit(a.p, n)), tol),
        Residual("groupoid.inverse_left", gap(multiply(inverse(a), a), unit(a.q, n)), tol),
    ]
    return out


# --------------------------------------------------------------------------
# test functions

@dataclass(frozen=True, eq=False)
class PolyFunction:
    """Polynomial in (p, q, entries of x) with exact partial derivatives."""

    rank: int
    n: int
    exps: np.ndarray     # (terms, 2*rank + n*n) non-negative integers
    coeffs: np.ndarray   # (terms,)

    @property
    def nvars(self):
        return 2 * self.rank + self.n * self.n

    def _vars(self, pt):
        return np.concatenate([np.asarray(pt.p, dtype=np.complex128),
                               np.asarray(pt.q, dtype=np.complex128),
                               np.asarray(pt.x, dtype=np.complex128).reshape(-1)])

    def __call__(self, pt):
        return poly_eval_grad(self.exps, self.coeffs, self._vars(pt))[0]

    def value_and_grad(self, pt):
        return poly_eval_grad(self.exps, self.coeffs, self._vars(pt))

    def partials(self, pt, algebra):
        """(δ₁f, Df, δ₂f, D′f) at pt."""
        _, grad = self.value_and_grad(pt)
        r = self.rank
        gp, gq = grad[:r], grad[r:2 * r]
        gx = grad[2 * r:].reshape(self.n, self.n)
        # Df[k] = sum_ab G_ab (b_k x)_ab ; D'f[k] = sum_ab G_ab (x b_k)_ab
        d = np.einsum("ab,kac,cb->k", gx, algebra.mats, pt.x)
        dprime = np.einsum("ab,ac,kcb->k", gx, pt.x, algebra.mats)
        return gp, d, gq, dprime

    # constructors ----------------------------------------------------------
    @classmethod
    def random(cls, rank, n, rng, terms=6, max_degree=3):
        nv = 2 * rank + n * n
        exps = np.zeros((terms, nv), dtype=np.int64)
        for t in range(terms):
            deg = rng.integers(1, max_degree + 1)
            for _ in range(deg):
                exps[t, rng.integers(nv)] += 1
        coeffs = rng.standard_normal(terms).astype(np.complex128)
        return cls(rank, n, exps, coeffs)

    @classmethod
    def random_in(cls, rank, n, rng, which, terms=4, max_degree=3):
        """Random polynomial in only the p ('p') or only the q ('q') variables."""
        nv = 2 * rank + n * n
        offset = 0 if which == "p" else rank
        exps = np.zeros((terms, nv), dtype=np.int64)
        for t in range(terms):
            for _ in range(rng.integers(1, max_degree + 1)):
                exps[t, offset + rng.integers(rank)] += 1
        return cls(rank, n, exps, rng.standard_normal(terms).astype(np.complex128))

    @classmethod
    def from_terms(cls, rank, n, terms):
        """terms: list of (coefficient, {variable index: power})."""
        nv = 2 * rank + n * n
        exps = np.zeros((len(terms), nv), dtype=np.int64)
        coeffs = np.zeros(len(terms), dtype=np.complex128)
        for t, (c, powers) in enumerate(terms):
            coeffs[t] = c
            for var, e in powers.items():
                exps[t, var] += e
        return cls(rank, n, exps, coeffs)

    def x_index(self, a, b):
        return 2 * self.rank + a * self.n + b

    def q_index(self, i):
        return self.rank + i

    def p_index(self, i):
        return i


class CallableFunction:
    """A scalar function on U×G×U whose partials come from central differences."""

    def __init__(self, fn, step=DEFAULT_FD_STEP, richardson=True):
        self.fn = fn
        self.step = step
        self.richardson = richardson

    def __call__(self, pt):
        return self.fn(pt)

    def _diff(self, curve):
        if self.richardson:
            return complex(curve_derivative(curve, self.step).value)
        return complex(central(curve, self.step))

    def partials(self, pt, algebra):
        r = algebra.rank
        eye = np.eye(r)
        d1 = np.array([self._diff(lambda t, i=i: self.fn(pt.shifted(dp=t * eye[i]))) for i in range(r)])
        d2 = np.array([self._diff(lambda t, i=i: self.fn(pt.shifted(dq=t * eye[i]))) for i in range(r)])
        d = np.array([self._diff(lambda t, k=k: self.fn(pt.shifted(left=mat_exp(t * algebra.mats[k]))))
                      for k in range(algebra.dim)])
        dprime = algebra.Ad(pt.x).T @ d
        return d1, d, d2, dprime


def partials(f, pt, algebra):
    return f.partials(pt, algebra)


# --------------------------------------------------------------------------
# cocycles and bivectors

@dataclass(frozen=True, eq=False)
class CoboundaryCocycle:
    """P(p, x, q) = -R(p) + Ad_x R(q) Ad_x^T."""

    r: RMatrix

    @property
    def algebra(self):
        return self.r.algebra

    def conj(self, x, m):
        ad = self.algebra.Ad(x)
        return ad @ m @ ad.T

    def __call__(self, p, x, q):
        return -self.r.R(p) + self.conj(x, self.r.R(q))

    def d_source(self, p, x, q, lam):
        return -self.r.dR(p, lam)

    def d_target(self, p, x, q, lam):
        return self.conj(x, self.r.dR(q, lam))

    def d_group(self, p, x, q, xi):
        """Derivative along x -> e^{tX} x."""
        m = self.conj(x, self.r.R(q))
        ad = self.algebra.ad(xi)
        return ad @ m + m @ ad.T

    def decompose(self, q0):
        """(l, π) with P(p,x,q) = -l(p) + π(x) + Ad_x l(q) Ad_x^T and l(q0) = 0."""
        def l(p):
            return -self(p, np.eye(self.algebra.n), q0)

        def pi(x):
            return self(q0, x, q0)
        return l, pi


@dataclass(frozen=True, eq=False)
class BivectorX:
    """Poisson bivector of dynamical type on U×G×U.

    ``cross`` adds a term S coupling δ₁f with δ₂g; any nonzero value destroys
    coisotropy of the multiplication graph and serves as a negative control.
    """

    cocycle: CoboundaryCocycle
    cross: np.ndarray = None

    @property
    def algebra(self):
        return self.cocycle.algebra

    def cartan_bracket_form(self, p):
        """K[i,j] = ⟨p, [x_i, x_j]⟩ (identically zero on the Cartan subalgebra)."""
        g = self.algebra
        r = g.rank
        return np.einsum("ijk,k->ij", g.struct[:r, :r, :r], np.asarray(p))

    def matrix(self, pt):
        g = self.algebra
        r, dim = g.rank, g.dim
        emb = np.zeros((r, dim))
        emb[:, :r] = np.eye(r)
        ad = g.Ad(pt.x)
        m = np.zeros((2 * r + dim, 2 * r + dim), dtype=np.complex128)
        sp, sg, sq = slice(0, r), slice(r, r + dim), slice(r + dim, 2 * r + dim)
        m[sp, sp] = self.cartan_bracket_form(pt.p)
        m[sq, sq] = -self.cartan_bracket_form(pt.q)
        m[sp, sg] = -emb
        m[sg, sp] = emb.T
        m[sq, sg] = -emb @ ad.T
        m[sg, sq] = ad @ emb.T
        m[sg, sg] = self.cocycle(pt.p, pt.x, pt.q)
        if self.cross is not None:
            m[sp, sq] = self.cross
            m[sq, sp] = -self.cross.T
        return m


def cotangent(f, pt, algebra):
    d1, d, d2, _ = f.partials(pt, algebra)
    return np.concatenate([d1, d, d2])


def poisson_bracket_X(f, g, pt, biv):
    """{f, g} at pt from the bivector matrix."""
    alg = biv.algebra
    return cotangent(f, pt, alg) @ biv.matrix(pt) @ cotangent(g, pt, alg)


def poisson_bracket_terms(f, g, pt, r):
    """{f, g} summed term by term from the closed-form bracket.

    Independent of ``BivectorX.matrix``; used as its oracle.
    """
    alg = r.algebra
    f1, fd, f2, fdp = f.partials(pt, alg)
    g1, gd, g2, gdp = g.partials(pt, alg)
    lift = alg.embed_h
    cart = alg.bracket
    total = pt.p @ alg.restrict_h(cart(lift(f1), lift(g1))) - pt.q @ alg.restrict_h(cart(lift(f2), lift(g2)))
    total -= gd @ lift(f1)
    total -= gdp @ lift(f2)
    total += fd @ lift(g1)
    total += fdp @ lift(g2)
    total += gd @ (r.R(pt.p) @ fd)
    total -= gdp @ (r.R(pt.q) @ fdp)
    return total


def bracket_function(f, g, biv, step=DEFAULT_FD_STEP):
    return CallableFunction(lambda pt: poisson_bracket_X(f, g, pt, biv), step)


def jacobi_bruteforce(f, g, h, pt, biv, tol=1e-5, step=DEFAULT_FD_STEP):
    """Cyclic sum {f,{g,h}} + {g,{h,f}} + {h,{f,g}}; inner brackets exact, outer by FD.

    Scaled by max(1, largest term): R grows like (α, q-μ)^-1 next to the
    singular guard and the terms then cancel from O(1e2) or more.
    """
    terms = [poisson_bracket_X(a, bracket_function(b, c, biv, step), pt, biv) for a, b, c in ((f, g, h), (g, h, f),
                                                                                              (h, f, g))]
    scale = max(1.0, max(abs(t) for t in terms))
    return Residual("jacobi.bruteforce", abs(sum(terms)) / scale, tol, pt.as_point())


def jacobi_condition_residual(pt, cocycle, tol=1e-8):
    """Analytic Jacobi condition on a cocycle, summed cyclically over basis triples.

    J(α,β,γ) = ⟨β,[Pα,Pγ]⟩ - ⟨β, DP(Pα)γ⟩ + ⟨β, δ₁P(ι*α)γ⟩ + ⟨β, δ₂P(ι*Ad_x^T α)γ⟩.
    """
    g = cocycle.algebra
    dim, r = g.dim, g.rank
    p, x, q = pt.p, pt.x, pt.q
    P = cocycle(p, x, q)
    adT = g.Ad(x).T
    dgroup = np.array([cocycle.d_group(p, x, q, np.eye(dim)[k]) for k in range(dim)])
    dsrc = np.array([cocycle.d_source(p, x, q, np.eye(r)[i]) for i in range(r)])
    dtgt = np.array([cocycle.d_target(p, x, q, np.eye(r)[i]) for i in range(r)])
    # basis covectors: α = e_a, so Pα = P[:, a]
    # term1[a,b,c] = ⟨e_b, [P e_a, P e_c]⟩
    t1 = np.einsum("ia,jc,ijb->abc", P, P, g.struct)
    # term2[a,b,c] = ⟨e_b, DP(P e_a) e_c⟩
    t2 = np.einsum("ka,kbc->abc", P, dgroup)
    # term3[a,b,c] = ⟨e_b, δ₁P(ι* e_a) e_c⟩ ; ι* e_a = a-th Cartan coordinate
    t3 = np.zeros((dim, dim, dim), dtype=np.complex128)
    t3[:r] = dsrc
    # term4: ι* Ad_x^T e_a = adT[:r, a]
    t4 = np.einsum("ia,ibc->abc", adT[:r, :], dtgt)
    j = t1 - t2 + t3 + t4
    cyc = j + j.transpose(1, 2, 0) + j.transpose(2, 0, 1)
    return Residual("jacobi.condition", magnitude(cyc), tol, pt.as_point())


def cocycle_residual(cocycle, p, q, r_, x, y, tol=1e-9):
    """P(p, xy, q) - P(p, x, r) - Ad_x P(r, y, q) Ad_x^T."""
    lhs = cocycle(p, x @ y, q)
    rhs = cocycle(p, x, r_) + cocycle.conj(x, cocycle(r_, y, q))
    return Residual("cocycle", magnitude(lhs - rhs), tol, serialize_point(p=p, q=q, r=r_))


def cocycle_skew_residual(cocycle, pt, tol=1e-10):
    m = cocycle(pt.p, pt.x, pt.q)
    return Residual("cocycle.skew", magnitude(m + m.T), tol, pt.as_point())


def conormal_graph(pt, y, r_, omega, z1, z2, z3, algebra):
    """The three cotangent vectors of a conormal covector to the graph of m.

    Returned in the (δ₁, D, δ₂) frames at (p,x,q), (q,y,r) and (p,xy,r).
    """
    adT = algebra.Ad(pt.x).T
    first = np.concatenate([z1, omega, z2])
    second = np.concatenate([-z2, adT @ omega, z3])
    third = np.concatenate([-z1, -omega, -z3])
    return first, second, third


def coisotropy_residual_X(biv, pt, y, r_, params, params2, tol=1e-9):
    """(Π ⊕ Π ⊕ -Π)(Ω, Ω′) for conormal covectors Ω, Ω′ to the graph of m."""
    alg = biv.algebra
    pt2 = GroupoidPoint(pt.q, y, r_)
    pt3 = GroupoidPoint(pt.p, pt.x @ y, r_)
    om = conormal_graph(pt, y, r_, *params, alg)
    om2 = conormal_graph(pt, y, r_, *params2, alg)
    val = (om[0] @ biv.matrix(pt) @ om2[0] + om[1] @ biv.matrix(pt2) @ om2[1]
           - om[2] @ biv.matrix(pt3) @ om2[2])
    return Residual("coisotropy.X", abs(val), tol, pt.as_point())


def graph_tangent_X(pt, y, r_, algebra):
    """Tangent space of the graph of m at ((p,x,q),(q,y,r),(p,xy,r)) as columns.

    Parameters (dp, dq, dr, X, Y) with x -> e^{X}x, y -> e^{Y}y map to
    (dp, X, dq) ⊕ (dq, Y, dr) ⊕ (dp, X + Ad_x Y, dr) in the right-trivialized frames.
    """
    r, dim = algebra.rank, algebra.dim
    ad = algebra.Ad(pt.x)
    size = 2 * r + dim
    cols = []
    for kind in range(3 * r + 2 * dim):
        v = np.zeros(3 * size, dtype=np.complex128)
        if kind < r:  # dp
            v[kind] = 1
            v[2 * size + kind] = 1
        elif kind < 2 * r:  # dq
            i = kind - r
            v[r + dim + i] = 1
            v[size + i] = 1
        elif kind < 3 * r:  # dr
            i = kind - 2 * r
            v[size + r + dim + i] = 1
            v[2 * size + r + dim + i] = 1
        elif kind < 3 * r + dim:  # X
            k = kind - 3 * r
            v[r + k] = 1
            v[2 * size + r + k] = 1
        else:  # Y
            k = kind - 3 * r - dim
            v[size + r + k] = 1
            v[2 * size + r:2 * size + r + dim] = ad[:, k]
        cols.append(v)
    return np.array(cols).T


def annihilator(tangent, tol=1e-10):
    """Orthonormal basis (columns) of covectors vanishing on the given column span."""
    u, s, vh = np.linalg.svd(tangent.T)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vh[rank:].conj().T


def coisotropy_generic(blocks, tangent):
    """max |N^T (Π₁ ⊕ Π₂ ⊕ -Π₃) N| over an annihilator basis N of the tangent space."""
    from scipy.linalg import block_diag
    big = block_diag(blocks[0], blocks[1], -blocks[2])
    n = annihilator(tangent)
    return magnitude(n.T @ big @ n)


def dynamical_morphism_residual(cocycle, z, p, tol=1e-8):
    """‖P(Ad*_{h^{-1}} p, h, p)‖ for h = exp(ιZ); the coadjoint H-action on h* is trivial."""
    g = cocycle.algebra
    h = mat_exp(g.matrix(g.embed_h(z)))
    val = magnitude(cocycle(p, h, p))
    return Residual("dynamical_morphism", val, tol, serialize_point(z=z, p=p))


# --------------------------------------------------------------------------
# unit and coarse groupoids

def _grad_fd(fn, point, step=DEFAULT_FD_STEP):
    point = np.asarray(point, dtype=np.complex128)
    eye = np.eye(point.size)
    return np.array([complex(central(lambda t, i=i: fn(point + t * eye[i]), step)) for i in range(point.size)])


def unit_and_coarse_brackets(mode, f, g, point, algebra):
    """Brackets on the Hamiltonian unit H×U and on the coarse groupoid U×U.

    hamiltonian-unit: point = (Z, p) with h = exp(ιZ); f, g take (Z, p).
    coarse: point = (p, q); f, g take (p, q).
    """
    r = algebra.rank

    def cart(z, w):
        return algebra.restrict_h(algebra.bracket(algebra.embed_h(z), algebra.embed_h(w)))

    a, b = (np.asarray(v, dtype=np.complex128) for v in point)
    joint = np.concatenate([a, b])
    gf = _grad_fd(lambda v: f(v[:r], v[r:]), joint)
    gg = _grad_fd(lambda v: g(v[:r], v[r:]), joint)
    if mode == "hamiltonian-unit":
        dpf, df = gf[:r], gf[r:]
        dpg, dg = gg[:r], gg[r:]
        return -dpg @ df + dpf @ dg - b @ cart(df, dg)
    if mode == "coarse":
        f1, f2 = gf[:r], gf[r:]
        g1, g2 = gg[:r], gg[r:]
        return a @ cart(f1, g1) - b @ cart(f2, g2)
    raise ValueError(f"unknown mode {mode!r}")


def unit_bivector(algebra, p):
    """Bivector of H×U in the (D′, δ) frame; nondegenerate of rank 2r."""
    r = algebra.rank
    m = np.zeros((2 * r, 2 * r), dtype=np.complex128)
    m[:r, r:] = np.eye(r)
    m[r:, :r] = -np.eye(r)
    k = np.einsum("ijk,k->ij", algebra.struct[:r, :r, :r], np.asarray(p))
    m[r:, r:] = -k
    return m


# --------------------------------------------------------------------------
# Hamiltonian reduction at the base point (0, 1, 0)

def invariant_generator(algebra, z, a):
    """f(p,x,q) = ⟨Z, q⟩ + Σ c_ab x_ab Π_{i≠a} x_ii with Df(0,1,0) = A.

    Each monomial takes exactly one entry from every row, so f is invariant
    under x -> hx for diagonal unimodular h.  Requires ι*A = 0.
    """
    n, r = algebra.n, algebra.rank
    rs = algebra.rootsystem
    terms = [(z[i], {r + i: 1}) for i in range(r) if z[i] != 0]
    npos = rs.n_positive
    for k in range(algebra.n_roots):
        coef = a[algebra.root_basis_index(k)]
        if coef == 0:
            continue
        row, col = np.argwhere(np.abs(algebra.mats[algebra.root_basis_index(k)]) > 0)[0]
        c = coef if k < npos else coef * 2 * n
        powers = {2 * r + row * n + col: 1}
        for i in range(n):
            if i != row:
                powers[2 * r + i * n + i] = powers.get(2 * r + i * n + i, 0) + 1
        terms.append((c, powers))
    if not terms:
        terms = [(0.0, {})]
    return PolyFunction.from_terms(r, n, terms)


def kernel_basis(algebra):
    """Basis (Z, A) of {ι*A = 0}: Cartan directions, then the root covectors."""
    r, dim = algebra.rank, algebra.dim
    out = []
    for i in range(r):
        out.append((np.eye(r)[i], np.zeros(dim)))
    for k in range(algebra.n_roots):
        a = np.zeros(dim)
        a[algebra.root_basis_index(k)] = 1.0
        out.append((np.zeros(r), a))
    return out


def reduced_linearization(biv, fz, fa, gz, ga, step=1e-4):
    """Value of {f, g} at (0, 1, 0) and its differential along (0, Y, λ).

    Returns (value, lam_part, y_part): lam_part[i] = derivative along λ = e_i,
    y_part[k] = derivative along Y = b_k.  Derivatives use Richardson
    extrapolation.
    """
    alg = biv.algebra
    r, n = alg.rank, alg.n
    f = invariant_generator(alg, fz, fa)
    g = invariant_generator(alg, gz, ga)
    base = GroupoidPoint(np.zeros(r), np.eye(n, dtype=np.complex128), np.zeros(r))
    value = poisson_bracket_X(f, g, base, biv)

    def along(shift):
        return complex(curve_derivative(lambda t: poisson_bracket_X(f, g, shift(t), biv), step).value)

    lam_part = np.array([along(lambda t, i=i: base.shifted(dq=t * np.eye(r)[i])) for i in range(r)])
    y_part = np.array([along(lambda t, k=k: base.shifted(left=mat_exp(t * alg.mats[k])))
                       for k in range(alg.dim)])
    return value, lam_part, y_part


def linearized_formula(cocycle, fz, fa, gz, ga):
    """Closed form of the differential at (0,1,0): pairs against (λ, Y).

    −⟨λ,[Z,Z′]⟩ + ⟨ad*_Z A′ − ad*_{Z′} A, Y⟩ + ⟨A, (∂P(Y) + δ₂P(λ))A′⟩.
    """
    alg = cocycle.algebra
    r, dim, n = alg.rank, alg.dim, alg.n
    zero, one = np.zeros(r), np.eye(n)
    lam_part = np.array([fa @ cocycle.d_target(zero, one, zero, np.eye(r)[i]) @ ga for i in range(r)])
    y_part = np.empty(dim, dtype=np.complex128)
    adz, adz2 = alg.ad(alg.embed_h(fz)), alg.ad(alg.embed_h(gz))
    lin = adz.T @ ga - adz2.T @ fa
    for k in range(dim):
        y_part[k] = lin[k] + fa @ cocycle.d_group(zero, one, zero, np.eye(dim)[k]) @ ga
    return lam_part, y_part
