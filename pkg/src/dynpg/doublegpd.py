"""Dressing actions of the standard Poisson Lie group SL(n) and the groupoids built on them.

Model.  The double is D = G×G with G embedded diagonally.  The dual group G*
is the subgroup of pairs (b₊, b₋), b₊ upper and b₋ lower triangular with
diag(b₊)·diag(b₋) = 1, and its Lie algebra is identified with (g*, [,]_*)
through ξ ↦ s·(R₊ξ, R₋ξ), R± = R ± ½♯.  The sign s is fixed by requiring this
map to be a Lie algebra homomorphism (``calibrate_order``).  A generic product
u·x in D refactors uniquely as x′·u′; then φ⁻_u(x) = x′ and φ⁺_x(u) = u′.

Frames.  Tangent vectors to G are right-trivialized (ẋx⁻¹ ∈ g) unless a name
says ``left``.  Tangent vectors to G* are left-trivialized (u⁻¹u̇ ∈ g*).
Covectors are paired with these frames, so a gradient on G lives in g* and a
gradient on G* lives in g.  Starred Ad and ad are plain transposes, matching
``liealg``.

The R = 0 model (``AdditiveDual``) replaces G* by the vector group g* with
φ⁺_x(A) = Ad_x^T A and φ⁻ trivial.
"""
from dataclasses import dataclass

import numpy as np

from .errors import BranchCutError, CalibrationError
from .liealg import SimpleLieAlgebra
from .numerics import DEFAULT_FD_STEP, birkhoff, central, mat_exp, sample_rng, small_vector
from .residual import Residual, magnitude, serialize_point

BRANCH_GUARD = 1e-6


def _inv(m):
    return np.linalg.inv(m)


def _fd(curve, step=DEFAULT_FD_STEP):
    return np.asarray(central(curve, step))


# --------------------------------------------------------------------------
# the dual group

@dataclass(frozen=True, eq=False)
class DualGroupElement:
    bplus: np.ndarray
    bminus: np.ndarray

    def flat(self):
        return np.concatenate([self.bplus.reshape(-1), self.bminus.reshape(-1)])


def _killing_pair_ops(algebra, R):
    return (R + 0.5 * algebra.killing_inv, R - 0.5 * algebra.killing_inv)


def calibrate_order(algebra, R, samples=4, seed=0, tol=1e-10):
    """The sign s making ξ ↦ s(R₊ξ, R₋ξ) a homomorphism from (g*, [,]_*).

    [A, B]_* = ad*_{RA}B − ad*_{RB}A.  Returns (s, table) where table maps each
    candidate sign to its worst residual.
    """
    rp, rm = _killing_pair_ops(algebra, R)
    table = {}
    for s in (1, -1):
        worst = 0.0
        for i in range(samples):
            rng = sample_rng(seed, "order", i)
            a, b = rng.standard_normal(algebra.dim), rng.standard_normal(algebra.dim)
            star = algebra.ad(R @ a).T @ b - algebra.ad(R @ b).T @ a
            for op in (rp, rm):
                lhs = algebra.bracket(s * op @ a, s * op @ b)
                worst = max(worst, magnitude(lhs - s * op @ star))
        table[s] = worst
    good = [s for s, v in table.items() if v < tol]
    if len(good) != 1:
        raise CalibrationError(f"embedding order undetermined: {table}")
    return good[0], table


class StandardDual:
    """G* for a constant r-matrix R solving the modified Yang-Baxter equation with χ scale 1/4."""

    kind = "standard"

    def __init__(self, algebra: SimpleLieAlgebra, R, order=None):
        self.algebra = algebra
        self.R = np.asarray(R, dtype=np.complex128)
        self.order = calibrate_order(algebra, self.R)[0] if order is None else order
        self._rp, self._rm = _killing_pair_ops(algebra, self.R)

    # group law ------------------------------------------------------------
    def identity(self):
        e = np.eye(self.algebra.n, dtype=np.complex128)
        return DualGroupElement(e, e.copy())

    def mul(self, u, v):
        return DualGroupElement(u.bplus @ v.bplus, u.bminus @ v.bminus)

    def inv(self, u):
        return DualGroupElement(_inv(u.bplus), _inv(u.bminus))

    def lie_pair(self, xi):
        g, s = self.algebra, self.order
        return g.matrix(s * self._rp @ xi), g.matrix(s * self._rm @ xi)

    def pair_to_covector(self, p, q):
        g = self.algebra
        return self.order * g.flat(g.coords(p) - g.coords(q))

    def exp(self, xi):
        p, q = self.lie_pair(np.asarray(xi, dtype=np.complex128))
        return DualGroupElement(mat_exp(p), mat_exp(q))

    def unflatten(self, v):
        n = self.algebra.n
        return DualGroupElement(v[:n * n].reshape(n, n), v[n * n:].reshape(n, n))

    # trivializations --------------------------------------------------------
    def left_triv(self, u, du):
        """u⁻¹u̇ as a covector, for a tangent pair du at u."""
        return self.pair_to_covector(_inv(u.bplus) @ du.bplus, _inv(u.bminus) @ du.bminus)

    def right_triv(self, u, du):
        return self.pair_to_covector(du.bplus @ _inv(u.bplus), du.bminus @ _inv(u.bminus))

    def Ad(self, u):
        """Adjoint action of u on g* = Lie(G*)."""
        cols = []
        for k in range(self.algebra.dim):
            p, q = self.lie_pair(np.eye(self.algebra.dim)[k])
            cols.append(self.pair_to_covector(u.bplus @ p @ _inv(u.bplus), u.bminus @ q @ _inv(u.bminus)))
        return np.array(cols).T

    def I_star(self, u):
        """The group morphism G* → h* integrating ι*."""
        g = self.algebra
        logs = np.log(np.diag(u.bplus).astype(np.complex128))
        return 2.0 * self.order * g.cartan_coords(logs)

    # dressing ----------------------------------------------------------------
    def factorize(self, x, u):
        return factorize_double(x, u)

    def split(self, p, q):
        """(Y, ξ) with (P, Q) = (Y, Y) + s(R₊ξ, R₋ξ) in d = g ⊕ g."""
        g = self.algebra
        xi = self.pair_to_covector(p, q)
        y = g.coords(p) - self.order * self._rp @ xi
        return y, xi

    def lambda_plus_exact(self, x_vec, u):
        """Left-trivialized d/dt φ⁺_{exp tX}(u) from the splitting of d."""
        m = self.algebra.matrix(x_vec)
        # uX u⁻¹ splits as ẋ′ + u̇′u⁻¹, so the split gives the right-trivialized field
        right = self.split(u.bplus @ m @ _inv(u.bplus), u.bminus @ m @ _inv(u.bminus))[1]
        return self.Ad(self.inv(u)) @ right

    def lambda_minus_exact(self, xi, x):
        """Right-trivialized d/dt φ⁻_{exp tξ}(x) from the splitting of d."""
        p, q = self.lie_pair(xi)
        xinv = _inv(x)
        y, _ = self.split(xinv @ p @ x, xinv @ q @ x)
        return self.algebra.Ad(x) @ y

    # chart ------------------------------------------------------------------
    def to_chart(self, u):
        """(Z, A, B) with b₊ = A e^{Z/2}, b₋ = B⁻¹ e^{−Z/2}; Z is a diagonal matrix."""
        z = np.diag(2.0 * np.log(np.diag(u.bplus).astype(np.complex128)))
        half = np.diag(np.exp(-np.diag(z) / 2.0))
        return z, u.bplus @ half, half @ _inv(u.bminus)

    def from_chart(self, z, a, b):
        half = np.diag(np.exp(np.diag(z) / 2.0))
        return DualGroupElement(a @ half, _inv(b) @ _inv(half))


def chart_mul(c1, c2):
    """(Z,A,B)(Z′,A′,B′) = (Z+Z′, A e^{Z/2} A′ e^{−Z/2}, e^{−Z/2} B′ e^{Z/2} B)."""
    z, a, b = c1
    z2, a2, b2 = c2
    e, ei = np.diag(np.exp(np.diag(z) / 2.0)), np.diag(np.exp(-np.diag(z) / 2.0))
    return z + z2, a @ e @ a2 @ ei, ei @ b2 @ e @ b


def chart_dressing(y, chart):
    """φ⁺ by exp(−Y), Y diagonal: conjugation of A and B by e^{Y}."""
    z, a, b = chart
    e, ei = mat_exp(y), mat_exp(-y)
    return z, e @ a @ ei, e @ b @ ei


class AdditiveDual:
    """G* = g* as a vector group; the R = 0 degeneration."""

    kind = "additive"
    order = 1

    def __init__(self, algebra: SimpleLieAlgebra):
        self.algebra = algebra
        self.R = np.zeros((algebra.dim, algebra.dim), dtype=np.complex128)

    def identity(self):
        return np.zeros(self.algebra.dim, dtype=np.complex128)

    def mul(self, u, v):
        return u + v

    def inv(self, u):
        return -u

    def exp(self, xi):
        return np.asarray(xi, dtype=np.complex128).copy()

    def unflatten(self, v):
        return v

    def left_triv(self, u, du):
        return du

    def right_triv(self, u, du):
        return du

    def Ad(self, u):
        return np.eye(self.algebra.dim, dtype=np.complex128)

    def I_star(self, u):
        return self.algebra.restrict_h(u)

    def factorize(self, x, u):
        return x, self.algebra.Ad(x).T @ u

    def lambda_plus_exact(self, x_vec, u):
        return self.algebra.ad(x_vec).T @ u

    def lambda_minus_exact(self, xi, x):
        return np.zeros(self.algebra.dim, dtype=np.complex128)


def _flat(u):
    return u.flat() if isinstance(u, DualGroupElement) else np.asarray(u)


def factorize_double(x, u):
    """(x′, u′) with u·x = x′·u′ in D = G×G.

    With M = x⁻¹b₊⁻¹b₋x = U₀DL₀ (Birkhoff), b₊′ = D^{−1/2}U₀⁻¹, b₋′ = D^{1/2}L₀
    and x′ = b₊ x b₊′⁻¹.  The square root is principal; diagonal entries of D
    within 1e−6 of the negative real axis are rejected.
    """
    xinv = _inv(x)
    m = xinv @ _inv(u.bplus) @ u.bminus @ x
    u0, d, l0 = birkhoff(m)
    if np.any((d.real < 0) & (np.abs(d.imag) < BRANCH_GUARD)):
        raise BranchCutError("factorize_double: D has an entry on the negative real axis")
    half = np.sqrt(d)
    bplus = np.diag(1.0 / half) @ _inv(u0)
    bminus = np.diag(half) @ l0
    return u.bplus @ x @ _inv(bplus), DualGroupElement(bplus, bminus)


def phi_plus(model, x, u):
    """Right dressing action of G on G*."""
    return model.factorize(x, u)[1]


def phi_minus(model, u, x):
    """Left dressing action of G* on G."""
    return model.factorize(x, u)[0]


def right_triv_G(x, dx, algebra):
    return algebra.coords(dx @ _inv(x))


def left_triv_G(x, dx, algebra):
    return algebra.coords(_inv(x) @ dx)


def dual_tangent(model, u, curve, step=DEFAULT_FD_STEP):
    """Left-trivialized derivative of a curve in G* through u."""
    d = _fd(lambda t: _flat(curve(t)), step)
    return model.left_triv(u, model.unflatten(d))


def lambda_plus(model, x_vec, u, step=DEFAULT_FD_STEP):
    """Left-trivialized dressing field λ⁺(X)(u) by central differences."""
    g = model.algebra
    return dual_tangent(model, u, lambda t: phi_plus(model, mat_exp(t * g.matrix(x_vec)), u), step)


def lambda_minus(model, xi, x, step=DEFAULT_FD_STEP, frame="right"):
    """Dressing field λ⁻(ξ)(x) by central differences; right- or left-trivialized."""
    g = model.algebra
    dx = _fd(lambda t: phi_minus(model, model.exp(t * np.asarray(xi)), x), step)
    return right_triv_G(x, dx, g) if frame == "right" else left_triv_G(x, dx, g)


def lambda_plus_matrix(model, u, step=DEFAULT_FD_STEP):
    eye = np.eye(model.algebra.dim)
    return np.array([lambda_plus(model, eye[k], u, step) for k in range(len(eye))]).T


def lambda_minus_matrix(model, x, step=DEFAULT_FD_STEP, frame="right"):
    eye = np.eye(model.algebra.dim)
    return np.array([lambda_minus(model, eye[k], x, step, frame) for k in range(len(eye))]).T


# --------------------------------------------------------------------------
# Poisson tensors on G and G*

def pi_right(model, x):
    """Sklyanin tensor, right-trivialized: {f,g}(x) = Df · Π^r(x) Dg."""
    ad = model.algebra.Ad(x)
    return -model.R + ad @ model.R @ ad.T


def pi_left(model, x):
    ad = model.algebra.Ad(_inv(x))
    return model.R - ad @ model.R @ ad.T


def pi_star_left(model, u, step=DEFAULT_FD_STEP):
    """G* tensor from the dressing field: {φ,ψ}(u) = D′φ · Π^l_*(u) D′ψ = −D′φ · λ⁺(D′ψ)(u)."""
    return -lambda_plus_matrix(model, u, step)


def pi_star_right(model, u, step=DEFAULT_FD_STEP):
    a = model.Ad(u)
    return a @ pi_star_left(model, u, step) @ a.T


def sklyanin_bracket(f, g, x, model):
    """⟨R Df, Dg⟩ − ⟨R D′f, D′g⟩ for functions of x (``PolyFunction`` on points with p = q = 0)."""
    from .pgroupoid import GroupoidPoint
    alg = model.algebra
    pt = GroupoidPoint(np.zeros(alg.rank), x, np.zeros(alg.rank))
    _, fd, _, fdp = f.partials(pt, alg)
    _, gd, _, gdp = g.partials(pt, alg)
    return gd @ (model.R @ fd) - gdp @ (model.R @ fdp)


# --------------------------------------------------------------------------
# sampling

def sample_group(algebra, rng, scale=0.4):
    return mat_exp(algebra.matrix(small_vector(rng, algebra.dim, scale)))


def sample_dual(model, rng, scale=0.4):
    return model.exp(small_vector(rng, model.algebra.dim, scale))


def sample_torus(algebra, rng, scale=0.4):
    return mat_exp(algebra.cartan_element(small_vector(rng, algebra.rank, scale)))


def dual_gap(model, u, v):
    return magnitude(_flat(u) - _flat(v))


# --------------------------------------------------------------------------
# the dual groupoid Γ = H × h* × G*

@dataclass(frozen=True, eq=False)
class GammaElement:
    h: np.ndarray
    p: np.ndarray
    u: object


def h_coad(algebra, h, p):
    """Ad*_h p on h*: the dual of Ad_h restricted to the Cartan block."""
    return algebra.restrict_h(algebra.Ad(h).T @ algebra.embed_h(p))


def h_ad_star(algebra, z, p):
    """ad*_Z p on h*."""
    return algebra.restrict_h(algebra.ad(algebra.embed_h(z)).T @ algebra.embed_h(p))


def cartan_bracket(algebra, z, w):
    return algebra.restrict_h(algebra.bracket(algebra.embed_h(z), algebra.embed_h(w)))


def gamma_alpha(model, a):
    """j₋(h,p,u) = Ad*_{h⁻¹}p + I*(u)."""
    return h_coad(model.algebra, _inv(a.h), a.p) + model.I_star(a.u)


def gamma_beta(model, a):
    """j₊(h,p,u) = p."""
    return np.asarray(a.p)


def gamma_unit(model, q):
    return GammaElement(np.eye(model.algebra.n, dtype=np.complex128), np.asarray(q, dtype=np.complex128),
                        model.identity())


def gamma_mul(model, a, b, tol=1e-9):
    """(h, j₋(k,q,v), u)·(k,q,v) = (hk, q, u φ⁺_{h⁻¹}(v))."""
    if magnitude(gamma_beta(model, a) - gamma_alpha(model, b)) > tol:
        raise ValueError("Γ elements are not composable")
    return GammaElement(a.h @ b.h, np.asarray(b.p), model.mul(a.u, phi_plus(model, _inv(a.h), b.u)))


def gamma_inv(model, a):
    """i(h,p,u) = (h⁻¹, j₋(h,p,u), φ⁺_h(u⁻¹))."""
    return GammaElement(_inv(a.h), gamma_alpha(model, a), phi_plus(model, a.h, model.inv(a.u)))


def gamma_gap(model, a, b):
    return magnitude(a.h - b.h, a.p - b.p, _flat(a.u) - _flat(b.u))


def gamma_compose_with(model, b, h, u):
    """The unique element (h, j₋(b), u) composable with b."""
    return GammaElement(h, gamma_alpha(model, b), u)


def gamma_axiom_residuals(model, a, b, c, tol=1e-9):
    """Associativity, units, inverses and source/target of products on a composable triple."""
    ab = gamma_mul(model, a, b)
    unit = lambda q: gamma_unit(model, q)
    pt = serialize_point(p=a.p, h=a.h)
    return [
        Residual("gamma.associativity",
                 gamma_gap(model, gamma_mul(model, ab, c), gamma_mul(model, a, gamma_mul(model, b, c))), tol, pt),
        Residual("gamma.left_unit", gamma_gap(model, gamma_mul(model, unit(gamma_alpha(model, a)), a), a), tol, pt),
        Residual("gamma.right_unit", gamma_gap(model, gamma_mul(model, a, unit(a.p)), a), tol, pt),
        Residual("gamma.inverse_right",
                 gamma_gap(model, gamma_mul(model, a, gamma_inv(model, a)), unit(gamma_alpha(model, a))), tol, pt),
        Residual("gamma.inverse_left",
                 gamma_gap(model, gamma_mul(model, gamma_inv(model, a), a), unit(a.p)), tol, pt),
        Residual("gamma.source_of_product",
                 magnitude(gamma_alpha(model, ab) - gamma_alpha(model, a)), tol, pt),
        Residual("gamma.target_of_product", magnitude(gamma_beta(model, ab) - b.p), tol, pt),
    ]


def torus_log(algebra, h0, h1):
    """Cartan coordinates of log(h0⁻¹h1) for diagonal h0, h1."""
    return algebra.cartan_coords(np.log(np.diag(_inv(h0) @ h1).astype(np.complex128)))


def gamma_tangent(model, a, curve, step=DEFAULT_FD_STEP):
    """Frame coordinates (Z, δp, u⁻¹u̇) of the velocity of a curve in Γ through a."""
    g = model.algebra
    z = _fd(lambda t: torus_log(g, a.h, curve(t).h), step)
    dp = _fd(lambda t: curve(t).p, step)
    du = dual_tangent(model, a.u, lambda t: curve(t).u, step)
    return np.concatenate([z, dp, du])


def gamma_moves(model, a):
    """One-parameter curves along the Γ frame directions (Z, δp, γ) at a."""
    g = model.algebra
    r, dim = g.rank, g.dim
    moves = []
    for i in range(r):
        moves.append(lambda t, i=i: GammaElement(a.h @ mat_exp(t * g.cartan_element(np.eye(r)[i])), a.p, a.u))
    for i in range(r):
        moves.append(lambda t, i=i: GammaElement(a.h, a.p + t * np.eye(r)[i], a.u))
    for k in range(dim):
        moves.append(lambda t, k=k: GammaElement(a.h, a.p, model.mul(a.u, model.exp(t * np.eye(dim)[k]))))
    return moves


def gamma_gradient(model, f, a, step=DEFAULT_FD_STEP):
    """(D′f ∈ h*, δf ∈ h, D′_*f ∈ g) at a by central differences."""
    return np.array([complex(central(lambda t, m=m: f(m(t)), step)) for m in gamma_moves(model, a)])


def gamma_bivector(model, a, step=DEFAULT_FD_STEP):
    """{f,g}_Γ = −⟨D′g,δf⟩ + ⟨D′f,δg⟩ − ⟨p,[δf,δg]⟩ − D′_*f·λ⁺(D′_*g)(u)."""
    g = model.algebra
    r, dim = g.rank, g.dim
    m = np.zeros((2 * r + dim, 2 * r + dim), dtype=np.complex128)
    m[:r, r:2 * r] = np.eye(r)
    m[r:2 * r, :r] = -np.eye(r)
    m[r:2 * r, r:2 * r] = -np.einsum("ijk,k->ij", g.struct[:r, :r, :r], np.asarray(a.p))
    m[2 * r:, 2 * r:] = -lambda_plus_matrix(model, a.u, step)
    return m


def gamma_bracket(model, f, g_, a, step=DEFAULT_FD_STEP):
    return gamma_gradient(model, f, a, step) @ gamma_bivector(model, a, step) @ gamma_gradient(model, g_, a, step)


def gamma_graph_tangent(model, a, b, step=DEFAULT_FD_STEP):
    """Tangent space of Gr(m) at (a, b, ab) as columns, in Γ³ frames.

    Graph parameters: h, k (torus), q, u, v with a = (h, j₋(b), u), b = (k, q, v).
    """
    g = model.algebra
    r, dim = g.rank, g.dim
    eye_r, eye = np.eye(r), np.eye(dim)

    def triple(h, k, q, u, v):
        bb = GammaElement(k, q, v)
        aa = GammaElement(h, gamma_alpha(model, bb), u)
        return aa, bb, gamma_mul(model, aa, bb)

    base = (a.h, b.h, b.p, a.u, b.u)
    ab = gamma_mul(model, a, b)
    curves = []
    for i in range(r):
        e = lambda t, i=i: mat_exp(t * g.cartan_element(eye_r[i]))
        curves.append(lambda t, e=e: triple(base[0] @ e(t), *base[1:]))
    for i in range(r):
        e = lambda t, i=i: mat_exp(t * g.cartan_element(eye_r[i]))
        curves.append(lambda t, e=e: triple(base[0], base[1] @ e(t), *base[2:]))
    for i in range(r):
        curves.append(lambda t, i=i: triple(base[0], base[1], base[2] + t * eye_r[i], base[3], base[4]))
    for k in range(dim):
        curves.append(lambda t, k=k: triple(*base[:3], model.mul(base[3], model.exp(t * eye[k])), base[4]))
    for k in range(dim):
        curves.append(lambda t, k=k: triple(*base[:4], model.mul(base[4], model.exp(t * eye[k]))))
    cols = []
    for c in curves:
        cols.append(np.concatenate([gamma_tangent(model, pt, lambda t, j=j: c(t)[j], step)
                                    for j, pt in enumerate((a, b, ab))]))
    return np.array(cols).T


def gamma_coisotropy_generic(model, a, b, step=DEFAULT_FD_STEP):
    """max |N^T (Π⊕Π⊕−Π) N| over an annihilator basis of T Gr(m)."""
    from .pgroupoid import coisotropy_generic
    ab = gamma_mul(model, a, b)
    blocks = [gamma_bivector(model, x, step) for x in (a, b, ab)]
    return coisotropy_generic(blocks, gamma_graph_tangent(model, a, b, step))


def _dual_map_jacobian(model, src, fn, tgt, step=DEFAULT_FD_STEP):
    """Left-trivialized Jacobian (dim × n_dirs) of a map into G* with fn(0-perturbation) = tgt."""
    return np.array([dual_tangent(model, tgt, lambda t, k=k: fn(k, t), step) for k in range(src)]).T


def gamma_conormal(model, a, b, mu, z1, z2, A, step=DEFAULT_FD_STEP):
    """The conormal covector Ω(μ, z₁, z₂, A) to Gr(m) at (a, b, ab), in Γ³ frames.

    μ ∈ h* and A ∈ g (a left-trivialized covector at u φ⁺_{h⁻¹}(v)).
    Also returns the pulled-back pieces reused by the isolated terms.
    """
    g = model.algebra
    r, dim = g.rank, g.dim
    h, k, q, u, v = a.h, b.h, b.p, a.u, b.u
    c = phi_plus(model, _inv(h), v)
    w = model.mul(u, c)
    eye_r, eye = np.eye(r), np.eye(dim)
    # h ↦ u φ⁺_{h⁻¹}(v) along h e^{tZ}, and v ↦ u φ⁺_{h⁻¹}(v) along v e^{tγ}
    jh = _dual_map_jacobian(model, r, lambda i, t: model.mul(
        u, phi_plus(model, _inv(h @ mat_exp(t * g.cartan_element(eye_r[i]))), v)), w, step)
    jv = _dual_map_jacobian(model, dim, lambda i, t: model.mul(
        u, phi_plus(model, _inv(h), model.mul(v, model.exp(t * eye[i])))), w, step)
    r_pull = model.Ad(model.inv(c)).T @ A
    kz1 = g.restrict_h(g.Ad(_inv(k)) @ g.embed_h(z1))  # Ad_{k⁻¹} z₁
    first = np.concatenate([-mu - jh.T @ A, z1, -r_pull])
    second = np.concatenate([-mu - h_ad_star(g, kz1, q), z2, -g.embed_h(z1) - jv.T @ A])
    third = np.concatenate([mu, -kz1 - z2, A])
    return (first, second, third), dict(jh=jh, jv=jv, r_pull=r_pull, c=c, w=w)


def gamma_coisotropy_explicit(model, a, b, omega, omega2, step=DEFAULT_FD_STEP):
    """(Π⊕Π⊕−Π)(Ω, Ω′) for conormal parameters omega = (μ, z₁, z₂, A)."""
    ab = gamma_mul(model, a, b)
    om, _ = gamma_conormal(model, a, b, *omega, step=step)
    om2, _ = gamma_conormal(model, a, b, *omega2, step=step)
    pis = [gamma_bivector(model, x, step) for x in (a, b, ab)]
    return om[0] @ pis[0] @ om2[0] + om[1] @ pis[1] @ om2[1] - om[2] @ pis[2] @ om2[2]


def gamma_coisotropy_terms(model, a, b, omega, omega2, step=DEFAULT_FD_STEP):
    """The three groups of terms (1), (2), (3) that do not cancel pairwise."""
    g = model.algebra
    _, z1, _, A = omega
    _, z1p, _, Ap = omega2
    v, u = b.u, a.u
    _, pc = gamma_conormal(model, a, b, *omega, step=step)
    _, pc2 = gamma_conormal(model, a, b, *omega2, step=step)
    lv = lambda x: lambda_plus(model, x, v, step)
    t1 = (-model.I_star(v) @ cartan_bracket(g, z1, z1p)
          - g.embed_h(z1) @ lv(g.embed_h(z1p)))
    t2 = (-pc["r_pull"] @ lambda_plus(model, pc2["r_pull"], u, step)
          - (pc["jv"].T @ A) @ lv(pc2["jv"].T @ Ap)
          + A @ lambda_plus(model, Ap, pc["w"], step))
    t3 = (pc2["jh"].T @ Ap) @ z1 - g.embed_h(z1) @ lv(pc2["jv"].T @ Ap)
    return t1, t2, t3


def sigma_trivialization(model, p, k, u, q):
    """Σ(p,(k,u),q) = (k, q, exp(s(p)) u φ⁺_{k⁻¹}(exp(−s(q)))) with s the Cartan section of ι*."""
    g = model.algebra
    left = model.exp(g.embed_h(p))
    right = phi_plus(model, _inv(k), model.exp(-g.embed_h(q)))
    return GammaElement(k, np.asarray(q), model.mul(model.mul(left, u), right))


# --------------------------------------------------------------------------
# the double D = G×G* in (g, u) coordinates and the matched pair (X, X*)

def double_mul(model, a, b):
    """(g₁,u₁)(g₂,u₂) = ((φ⁻_{u₂⁻¹}(g₁⁻¹))⁻¹g₂, u₁(φ⁺_{g₁⁻¹}(u₂⁻¹))⁻¹)."""
    (g1, u1), (g2, u2) = a, b
    x, w = model.factorize(_inv(g1), model.inv(u2))
    return _inv(x) @ g2, model.mul(u1, model.inv(w))


def double_to_pair(model, a):
    """The element u·g of G×G, for the standard model."""
    g, u = a
    return u.bplus @ g, u.bminus @ g


@dataclass(frozen=True, eq=False)
class MatchedElement:
    """(p, h, g, u, q) in the pair groupoid h*×M×h*, M = H × D."""
    p: np.ndarray
    h: np.ndarray
    g: np.ndarray
    u: object
    q: np.ndarray


def matched_mul(model, a, b, tol=1e-9):
    if magnitude(a.q - b.p) > tol:
        raise ValueError("matched-pair elements are not composable")
    g, u = double_mul(model, (a.g, a.u), (b.g, b.u))
    return MatchedElement(a.p, a.h @ b.h, g, u, b.q)


def matched_gap(model, a, b):
    return magnitude(a.p - b.p, a.h - b.h, a.g - b.g, _flat(a.u) - _flat(b.u), a.q - b.q)


def embed_x(model, pt):
    e = np.eye(model.algebra.n, dtype=np.complex128)
    return MatchedElement(pt.p, e, pt.x, model.identity(), pt.q)


def embed_xstar(model, a):
    return MatchedElement(gamma_alpha(model, a), a.h, a.h, a.u, a.p)


def matched_factorization(model, m):
    """(x, a) ∈ X × X* with embed_x(x)·embed_xstar(a) = m.

    x = (p, φ⁻_u(gh⁻¹), Ad*_{h⁻¹}q + I*(φ⁺_{gh⁻¹}u)) and a = (h, q, φ⁺_{gh⁻¹}(u)).
    """
    from .pgroupoid import GroupoidPoint
    y = m.g @ _inv(m.h)
    x, w = model.factorize(y, m.u)
    a = GammaElement(m.h, np.asarray(m.q), w)
    return GroupoidPoint(np.asarray(m.p), x, gamma_alpha(model, a)), a


def matched_psi(model, a, pt):
    """(ψ⁻_a(pt), ψ⁺_pt(a)) from refactoring embed_xstar(a)·embed_x(pt)."""
    return matched_factorization(model, matched_mul(model, embed_xstar(model, a), embed_x(model, pt)))


# --------------------------------------------------------------------------
# groupoid actions Ψ±

def psi_minus(model, a, k, pt, tol=1e-9):
    """Ψ⁻_{(h,p,u,k)}(p,g,q) = (Ad*_{h⁻¹}p + I*(u), φ⁻_u(hgk⁻¹), Ad*_{k⁻¹}q + I*(φ⁺_{hgk⁻¹}u))."""
    from .pgroupoid import GroupoidPoint
    if magnitude(a.p - pt.p) > tol:
        raise ValueError("moment mismatch: β(g₋) ≠ α(g₊)")
    y = a.h @ pt.x @ _inv(k)
    x, w = model.factorize(y, a.u)
    return GroupoidPoint(gamma_alpha(model, a), x, h_coad(model.algebra, _inv(k), pt.q) + model.I_star(w))


def psi_plus(model, h, k, pt, a, tol=1e-9):
    """Ψ⁺_{(h,k,p,g,q)}(h,p,u) = (k, q, φ⁺_{hgk⁻¹}(u))."""
    if magnitude(a.h - h) > tol or magnitude(a.p - pt.p) > tol:
        raise ValueError("moment mismatch: J₋(g₋) ≠ source of the X_e element")
    return GammaElement(k, np.asarray(pt.q), phi_plus(model, h @ pt.x @ _inv(k), a.u))


def x_gap(a, b):
    return magnitude(a.p - b.p, a.x - b.x, a.q - b.q)


# --------------------------------------------------------------------------
# the double groupoid S = X*_e *_{J₊} X: elements (g₋, k, g₊)

@dataclass(frozen=True, eq=False)
class SquareElement:
    a: GammaElement   # g₋ ∈ X*
    k: np.ndarray
    pt: object        # g₊ ∈ X


def square_gap(model, s, t):
    return gamma_gap(model, s.a, t.a) + magnitude(s.k - t.k) + x_gap(s.pt, t.pt)


# horizontal structure X*_e ⋉ X ⇉ X
def alpha_h(model, s):
    return psi_minus(model, s.a, s.k, s.pt)


def beta_h(model, s):
    return s.pt


def mul_h(model, s, t, tol=1e-9):
    if x_gap(s.pt, alpha_h(model, t)) > tol:
        raise ValueError("horizontal product: β̃_H(s) ≠ α̃_H(t)")
    return SquareElement(gamma_mul(model, s.a, t.a), s.k @ t.k, t.pt)


def unit_h(model, pt):
    return SquareElement(gamma_unit(model, pt.p), np.eye(model.algebra.n, dtype=np.complex128), pt)


def inv_h(model, s):
    return SquareElement(gamma_inv(model, s.a), _inv(s.k), alpha_h(model, s))


# vertical structure X* ⋊ X_e ⇉ X*
def alpha_v(model, s):
    return s.a


def beta_v(model, s):
    return psi_plus(model, s.a.h, s.k, s.pt, s.a)


def mul_v(model, s, t, tol=1e-9):
    from .pgroupoid import multiply
    if gamma_gap(model, beta_v(model, s), t.a) > tol:
        raise ValueError("vertical product: β̃_V(s) ≠ α̃_V(t)")
    return SquareElement(s.a, t.k, multiply(s.pt, t.pt))


def unit_v(model, a):
    from .pgroupoid import unit
    return SquareElement(a, a.h, unit(a.p, model.algebra.n))


def inv_v(model, s):
    """ĩ_V(g₋, k, g₊) = (Ψ⁺(g₋), Pr₁(g₋), g₊⁻¹)."""
    from .pgroupoid import inverse
    return SquareElement(beta_v(model, s), s.a.h, inverse(s.pt))


def vacant_embedding(model, a, pt):
    """(g₋, g₊) ↦ (g₋, Pr₁(g₋), g₊)."""
    return SquareElement(a, a.h, pt)


# --------------------------------------------------------------------------
# the symplectic groupoid S′ = (H×h*) × (H×h*)⁻ × (G×G*) ⇉ X

@dataclass(frozen=True, eq=False)
class SElement:
    h: np.ndarray
    p: np.ndarray
    k: np.ndarray
    q: np.ndarray
    g: np.ndarray
    u: object


def sprime_gap(s, t):
    return magnitude(s.h - t.h, s.p - t.p, s.k - t.k, s.q - t.q, s.g - t.g, _flat(s.u) - _flat(t.u))


def _twist(model, s):
    """(y, v) = (φ⁻_{u⁻¹}(g⁻¹), φ⁺_{g⁻¹}(u⁻¹)), the refactorization of u⁻¹g⁻¹."""
    return model.factorize(_inv(s.g), model.inv(s.u))


def sprime_alpha(model, s):
    """(Ad*_{h⁻¹}p + I*(φ⁺_{g⁻¹}(u⁻¹)⁻¹), g, Ad*_{k⁻¹}q + I*(u))."""
    from .pgroupoid import GroupoidPoint
    g = model.algebra
    _, v = _twist(model, s)
    return GroupoidPoint(h_coad(g, _inv(s.h), s.p) + model.I_star(model.inv(v)), s.g,
                         h_coad(g, _inv(s.k), s.q) + model.I_star(s.u))


def sprime_beta(model, s):
    """(p, h⁻¹ φ⁻_{u⁻¹}(g⁻¹)⁻¹ k, q)."""
    from .pgroupoid import GroupoidPoint
    y, _ = _twist(model, s)
    return GroupoidPoint(np.asarray(s.p), _inv(s.h) @ _inv(y) @ s.k, np.asarray(s.q))


def sprime_mul(model, s, t, tol=1e-9):
    """(h₁h₂, p₂, k₁k₂, q₂, g₁, u₁φ⁺_{k₁⁻¹}(u₂)) for β(s) = α(t)."""
    if x_gap(sprime_beta(model, s), sprime_alpha(model, t)) > tol:
        raise ValueError("S′ elements are not composable")
    return SElement(s.h @ t.h, np.asarray(t.p), s.k @ t.k, np.asarray(t.q), s.g,
                    model.mul(s.u, phi_plus(model, _inv(s.k), t.u)))


def sprime_unit(model, pt):
    e = np.eye(model.algebra.n, dtype=np.complex128)
    return SElement(e, np.asarray(pt.p), e.copy(), np.asarray(pt.q), pt.x, model.identity())


def sprime_left_partner(model, t, h, k, u):
    """The unique s = (h, p, k, q, g, u) with β(s) = α(t) for the given h, k, u."""
    x = sprime_alpha(model, t)
    y = h @ x.x @ _inv(k)
    # φ⁻_{u⁻¹}(g⁻¹) = y⁻¹, so g⁻¹ = φ⁻_u(y⁻¹)
    g = _inv(phi_minus(model, u, _inv(y)))
    return SElement(h, np.asarray(x.p), k, np.asarray(x.q), g, u)


# product groupoid structure over X* used by ρ
def product_source(model, s):
    _, v = _twist(model, s)
    return GammaElement(s.h, np.asarray(s.p), model.inv(v))


def product_target(model, s):
    return GammaElement(s.k, np.asarray(s.q), s.u)


def product_mul(model, s, t, tol=1e-9):
    if gamma_gap(model, product_target(model, s), product_source(model, t)) > tol:
        raise ValueError("product-groupoid elements are not composable")
    return SElement(s.h, np.asarray(s.p), t.k, np.asarray(t.q), s.g @ t.g, t.u)


def product_right_partner(model, s, l, r_, g2):
    """The unique t = (k, q, l, r, g₂, u₂) with source(t) = target(s)."""
    # φ⁺_{g₂⁻¹}(u₂⁻¹)⁻¹ = u ⟺ u₂ = φ⁺_{g₂}(u⁻¹)⁻¹
    u2 = model.inv(phi_plus(model, g2, model.inv(s.u)))
    return SElement(s.k, np.asarray(s.q), l, np.asarray(r_), g2, u2)


def rho(model, s):
    """(h,p,k,q,g,u) ↦ ((h, p, φ⁺_{g⁻¹}(u⁻¹)⁻¹), (h, k, p, h⁻¹φ⁻_{u⁻¹}(g⁻¹)⁻¹k, q))."""
    from .pgroupoid import GroupoidPoint
    y, v = _twist(model, s)
    a = GammaElement(s.h, np.asarray(s.p), model.inv(v))
    return SquareElement(a, s.k, GroupoidPoint(np.asarray(s.p), _inv(s.h) @ _inv(y) @ s.k, np.asarray(s.q)))


def rho_inverse(model, sq):
    """Solve g u = w·(h x k⁻¹) in D: g = φ⁻_w(hxk⁻¹), u = φ⁺_{hxk⁻¹}(w)."""
    y = sq.a.h @ sq.pt.x @ _inv(sq.k)
    g, u = model.factorize(y, sq.a.u)
    return SElement(sq.a.h, np.asarray(sq.a.p), sq.k, np.asarray(sq.pt.q), g, u)


# --------------------------------------------------------------------------
# the S′ Poisson bivector

def sprime_moves(model, s):
    """Curves along the frame (Z₁, δp, Z₂, δq, Y, γ): h e^{Z₁}, k e^{Z₂}, e^{Y}g, u e^{γ}."""
    g = model.algebra
    r, dim = g.rank, g.dim
    er, ed = np.eye(r), np.eye(dim)
    tor = lambda t, i: mat_exp(t * g.cartan_element(er[i]))
    moves = []
    moves += [lambda t, i=i: SElement(s.h @ tor(t, i), s.p, s.k, s.q, s.g, s.u) for i in range(r)]
    moves += [lambda t, i=i: SElement(s.h, s.p + t * er[i], s.k, s.q, s.g, s.u) for i in range(r)]
    moves += [lambda t, i=i: SElement(s.h, s.p, s.k @ tor(t, i), s.q, s.g, s.u) for i in range(r)]
    moves += [lambda t, i=i: SElement(s.h, s.p, s.k, s.q + t * er[i], s.g, s.u) for i in range(r)]
    moves += [lambda t, k=k: SElement(s.h, s.p, s.k, s.q, mat_exp(t * g.mats[k]) @ s.g, s.u)
              for k in range(dim)]
    moves += [lambda t, k=k: SElement(s.h, s.p, s.k, s.q, s.g, model.mul(s.u, model.exp(t * ed[k])))
              for k in range(dim)]
    return moves


@dataclass(frozen=True)
class SGradient:
    D1: np.ndarray
    d1: np.ndarray
    D2: np.ndarray
    d2: np.ndarray
    D: np.ndarray      # right gradient on G, in g*
    Dp: np.ndarray     # left gradient on G
    Dsp: np.ndarray    # left gradient on G*, in g
    Ds: np.ndarray     # right gradient on G*

    def vector(self):
        return np.concatenate([self.D1, self.d1, self.D2, self.d2, self.D, self.Dsp])


def sprime_gradient(model, f, s, step=DEFAULT_FD_STEP):
    g = model.algebra
    r, dim = g.rank, g.dim
    v = np.array([complex(central(lambda t, m=m: f(m(t)), step)) for m in sprime_moves(model, s)])
    d = v[4 * r:4 * r + dim]
    dsp = v[4 * r + dim:]
    return SGradient(v[:r], v[r:2 * r], v[2 * r:3 * r], v[3 * r:4 * r], d, g.Ad(s.g).T @ d,
                     dsp, model.Ad(model.inv(s.u)).T @ dsp)


def sprime_bivector(model, s, step=DEFAULT_FD_STEP):
    """Matrix of {,}_{S′} in the frame of ``sprime_moves``.

    −⟨D′₁F′,δ₁F⟩ + ⟨D′₁F,δ₁F′⟩ − ⟨p,[δ₁F,δ₁F′]⟩ + ⟨D′₂F′,δ₂F⟩ − ⟨D′₂F,δ₂F′⟩ + ⟨q,[δ₂F,δ₂F′]⟩
    − ⟨∂F, λ⁻(DF′)(g)⟩ + ⟨∂_*F, λ⁺(D′_*F′)(u)⟩ − ⟨D′F′, D_*F⟩ + ⟨D′F, D_*F′⟩.
    """
    g = model.algebra
    r, dim = g.rank, g.dim
    n = 4 * r + 2 * dim
    m = np.zeros((n, n), dtype=np.complex128)
    a1, b1, a2, b2 = (slice(i * r, (i + 1) * r) for i in range(4))
    c, e = slice(4 * r, 4 * r + dim), slice(4 * r + dim, n)
    form = lambda w: np.einsum("ijk,k->ij", g.struct[:r, :r, :r], np.asarray(w))
    m[a1, b1], m[b1, a1] = np.eye(r), -np.eye(r)
    m[b1, b1] = -form(s.p)
    m[a2, b2], m[b2, a2] = -np.eye(r), np.eye(r)
    m[b2, b2] = form(s.q)
    m[c, c] = -lambda_minus_matrix(model, s.g, step)
    m[e, e] = lambda_plus_matrix(model, s.u, step)
    cross = g.Ad(s.g) @ model.Ad(model.inv(s.u)).T
    m[c, e] = cross
    m[e, c] = -cross.T
    return m


def sprime_bracket(model, f, f2, s, step=DEFAULT_FD_STEP, bivector=None):
    m = sprime_bivector(model, s, step) if bivector is None else bivector
    return sprime_gradient(model, f, s, step).vector() @ m @ sprime_gradient(model, f2, s, step).vector()


def sprime_unit_tangent(model):
    """Tangent of ε(X) at any unit, as columns in the S′ frame: directions δp, δq, Y."""
    g = model.algebra
    r, dim = g.rank, g.dim
    n = 4 * r + 2 * dim
    cols = []
    for i in range(r):
        v = np.zeros(n)
        v[r + i] = 1
        cols.append(v)
    for i in range(r):
        v = np.zeros(n)
        v[3 * r + i] = 1
        cols.append(v)
    for k in range(dim):
        v = np.zeros(n)
        v[4 * r + k] = 1
        cols.append(v)
    return np.array(cols).T


# --------------------------------------------------------------------------
# symplectic leaves of X

def x_tangent(algebra, pt, curve, step=DEFAULT_FD_STEP):
    """Frame coordinates (δp, ẋx⁻¹, δq) of a curve in X through pt."""
    dp = _fd(lambda t: curve(t).p, step)
    dx = _fd(lambda t: curve(t).x, step)
    dq = _fd(lambda t: curve(t).q, step)
    return np.concatenate([dp, right_triv_G(pt.x, dx, algebra), dq])


def leaf_action(model, k, h, u, pt):
    """Ψ̃⁻((k,(h,u)), (p,g,q)) = Ψ⁻_{(h,p,u,k)}(p,g,q)."""
    return psi_minus(model, GammaElement(h, np.asarray(pt.p), u), k, pt)


def orbit_tangent(model, pt, step=DEFAULT_FD_STEP):
    """Columns: orbit velocities along the Lie algebra of H × (H ⋉ G*) at the identity."""
    g = model.algebra
    r, dim = g.rank, g.dim
    e = np.eye(g.n, dtype=np.complex128)
    one = model.identity()
    tor = lambda t, i: mat_exp(t * g.cartan_element(np.eye(r)[i]))
    cols = []
    for i in range(r):
        cols.append(x_tangent(g, pt, lambda t, i=i: leaf_action(model, tor(t, i), e, one, pt), step))
    for i in range(r):
        cols.append(x_tangent(g, pt, lambda t, i=i: leaf_action(model, e, tor(t, i), one, pt), step))
    for k in range(dim):
        cols.append(x_tangent(g, pt, lambda t, k=k: leaf_action(model, e, e, model.exp(t * np.eye(dim)[k]), pt),
                              step))
    return np.array(cols).T


def numerical_rank(m, threshold=1e-8):
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > threshold * max(1.0, s[0] if s.size else 1.0)))


def leaf_tangency(model, biv, pt, step=DEFAULT_FD_STEP, threshold=1e-8):
    """(rank Π^#, rank orbit, inclusion residual) at pt.

    The inclusion residual is the norm of the orbit directions after projecting
    out the range of Π^#, relative to their size.
    """
    m = biv.matrix(pt)
    t = orbit_tangent(model, pt, step)
    u, s, _ = np.linalg.svd(m)
    rank_m = int(np.sum(s > threshold * max(1.0, s[0])))
    basis = u[:, :rank_m]
    rest = t - basis @ (basis.conj().T @ t)
    scale = max(1.0, float(np.max(np.abs(t))))
    return rank_m, numerical_rank(t, threshold), magnitude(rest) / scale


# --------------------------------------------------------------------------
# residual aggregators

def dual_mul(u, v):
    return DualGroupElement(u.bplus @ v.bplus, u.bminus @ v.bminus)


def dual_inv(u):
    return DualGroupElement(_inv(u.bplus), _inv(u.bminus))


def _res(name, value, tol, point=None):
    return Residual(name, float(value), tol, point or {})


# identities in ``dressing_identities_residual`` that involve no finite differences
DRESSING_FD_FREE = frozenset({
    "dressing.plus_twisted", "dressing.minus_twisted", "dressing.plus_action", "dressing.minus_action",
    "tensor.left_torus_covariance", "tensor.dual_adjoint_torus_intertwining", "dressing.twist_inverse_pair",
    "dressing.twisted_right_translation",
})


def dressing_identities_residual(model, x, y, u, v, h, k, z_h, gamma, u2, tol_exact=1e-9, tol_fd=1e-6,
                                 step=DEFAULT_FD_STEP):
    """Twisted-automorphism laws, the operator identities behind leaf tangency, and the dressing lemmas.

    x, y ∈ G; u, v, u2 ∈ G*; h, k ∈ H; z_h ∈ h; gamma ∈ g*.  The Cartan
    restriction on z_h matters: the ι-lemmas fail for generic Z ∈ g.
    """
    g = model.algebra
    pt = serialize_point(x=x, u=_flat(u))
    Adt = lambda z: g.Ad(z).T
    lp = lambda z, w: lambda_plus(model, z, w, step)
    out = [
        _res("dressing.plus_twisted", dual_gap(model, phi_plus(model, x, model.mul(u, v)),
             model.mul(phi_plus(model, phi_minus(model, v, x), u), phi_plus(model, x, v))), tol_exact, pt),
        _res("dressing.minus_twisted", magnitude(phi_minus(model, u, x @ y)
             - phi_minus(model, u, x) @ phi_minus(model, phi_plus(model, x, u), y)), tol_exact, pt),
        _res("dressing.plus_action", dual_gap(model, phi_plus(model, x @ y, u),
             phi_plus(model, y, phi_plus(model, x, u))), tol_exact, pt),
        _res("dressing.minus_action", magnitude(phi_minus(model, model.mul(u, v), x)
             - phi_minus(model, u, phi_minus(model, v, x))), tol_exact, pt),
    ]
    eye = np.eye(g.dim)
    xu, ux = phi_minus(model, u, x), phi_plus(model, x, u)
    psl = lambda w: pi_star_left(model, w, step)
    out += [
        _res("tensor.dual_left_torus_covariance",
             magnitude(psl(phi_plus(model, h @ x @ _inv(k), u))
                       - Adt(_inv(k)) @ psl(phi_plus(model, h @ x, u)) @ g.Ad(_inv(k))), tol_fd, pt),
        _res("tensor.left_torus_covariance",
             magnitude(pi_left(model, h @ x @ _inv(k)) - g.Ad(k) @ pi_left(model, x) @ g.Ad(k).T), tol_exact, pt),
        _res("tensor.right_resolution_of_identity",
             magnitude(eye - model.Ad(u) @ Adt(_inv(x)) @ model.Ad(model.inv(ux)) @ Adt(xu)
                       - pi_star_right(model, u, step) @ pi_right(model, xu)), tol_fd, pt),
        _res("tensor.dual_adjoint_torus_intertwining",
             magnitude(model.Ad(model.inv(v)) @ Adt(k) - Adt(k) @ model.Ad(model.inv(phi_plus(model, _inv(k), v)))),
             tol_exact, pt),
        _res("tensor.left_resolution_of_identity",
             magnitude(eye - model.Ad(model.inv(ux)) @ Adt(xu) @ model.Ad(u) @ Adt(_inv(x))
                       - psl(ux) @ pi_left(model, x)), tol_fd, pt),
    ]
    # with s = (·,·,·,·,x,u): yy = φ⁻_{u⁻¹}(x⁻¹), vv = φ⁺_{x⁻¹}(u⁻¹), w = φ⁺_{yy}(u)
    yy, vv = model.factorize(_inv(x), model.inv(u))
    w = phi_plus(model, yy, u)
    Z = g.embed_h(z_h)
    c = Adt(_inv(yy)) @ gamma
    out += [
        _res("dressing.twist_inverse_pair", dual_gap(model, model.mul(w, vv), model.identity()), tol_exact, pt),
        _res("dressing.coadjoint_transfer",
             magnitude(model.Ad(model.inv(u)).T @ g.Ad(yy) @ Z - g.Ad(_inv(x)) @ Z
                       - lambda_minus(model, model.Ad(model.inv(vv)) @ lp(Z, w), x, step, "left")), tol_fd, pt),
        _res("dressing.twisted_right_translation",
             dual_gap(model, phi_plus(model, _inv(x), model.mul(phi_plus(model, _inv(yy), u2), model.inv(u))),
                      model.mul(u2, vv)), tol_exact, pt),
        _res("dressing.momentum_infinitesimal", magnitude(g.restrict_h(lp(Z, u))), tol_fd, pt),
        _res("dressing.field_transfer_left",
             magnitude(g.Ad(x).T @ lp(Z, vv) + model.Ad(u) @ lp(g.Ad(yy) @ Z, u)), tol_fd, pt),
        _res("dressing.field_transfer_adjoint",
             magnitude(lp(g.Ad(x) @ Z, vv) + model.Ad(model.inv(vv)) @ Adt(yy) @ lp(Z, u)), tol_fd, pt),
        _res("dressing.gradient_transfer",
             magnitude(g.Ad(x).T @ model.Ad(model.inv(vv)) @ gamma - model.Ad(u) @ c
                       + model.Ad(u) @ lp(lambda_minus(model, c, yy, step), u)), tol_fd, pt),
    ]
    return out


def matched_pair_residuals(model, m, a, pt, tol=1e-9):
    """Factorization roundtrip of m = (p,h,g,u,q) and ψ± read off the factors of a·pt."""
    x, xs = matched_factorization(model, m)
    y, b = matched_psi(model, a, pt)
    point = pt.as_point()
    return [
        _res("matched.roundtrip", matched_gap(model, matched_mul(model, embed_x(model, x), embed_xstar(model, xs)), m),
             tol, point),
        _res("matched.psi_minus_restriction", x_gap(y, psi_minus(model, a, a.h, pt)), tol, point),
        _res("matched.psi_plus_formula",
             gamma_gap(model, b, GammaElement(a.h, pt.q, phi_plus(model, a.h @ pt.x @ _inv(a.h), a.u))), tol, point),
    ]


def action_residuals(model, a0, a1, k, k1, k2, pt, pt2, tol=1e-8):
    """Action laws of Ψ± and their compatibilities.

    Requires β(a1) = α(a0), a0.p = pt.p and pt.q = pt2.p.
    """
    from .pgroupoid import multiply
    point = pt.as_point()
    n = model.algebra.n
    b0 = psi_plus(model, a0.h, k, pt, a0)
    return [
        _res("psi_minus.action", x_gap(psi_minus(model, gamma_mul(model, a1, a0), k1 @ k, pt),
                                       psi_minus(model, a1, k1, psi_minus(model, a0, k, pt))), tol, point),
        _res("psi_minus.unit", x_gap(psi_minus(model, gamma_unit(model, pt.p), np.eye(n), pt), pt), tol, point),
        _res("psi_plus.action", gamma_gap(model, psi_plus(model, a0.h, k2, multiply(pt, pt2), a0),
                                          psi_plus(model, k, k2, pt2, b0)), tol, point),
        _res("psi_plus.unit", gamma_gap(model, psi_plus(model, a0.h, a0.h, _x_unit(model, a0.p), a0), a0), tol, point),
        _res("psi.moment_compatibility", magnitude(psi_minus(model, a0, k, pt).q - gamma_alpha(model, b0)), tol, point),
        _res("psi.minus_over_products",
             x_gap(psi_minus(model, a0, k2, multiply(pt, pt2)),
                   multiply(psi_minus(model, a0, k, pt), psi_minus(model, b0, k2, pt2))), tol, point),
        _res("psi.plus_over_products",
             gamma_gap(model, psi_plus(model, a1.h @ a0.h, k1 @ k, pt, gamma_mul(model, a1, a0)),
                       gamma_mul(model, psi_plus(model, a1.h, k1, psi_minus(model, a0, k, pt), a1), b0)), tol, point),
    ]


def _x_unit(model, p):
    from .pgroupoid import unit
    return unit(p, model.algebra.n)


def double_groupoid_residuals(model, a0, a1, k, k1, k2, pt, pt2, tol=1e-8):
    """Morphism, unit and inverse compatibilities of the two action-groupoid structures."""
    from .pgroupoid import multiply
    point = pt.as_point()
    s = SquareElement(a0, k, pt)
    s2 = SquareElement(beta_v(model, s), k2, pt2)
    s1 = SquareElement(a1, k1, alpha_h(model, s))
    sv, sh = mul_v(model, s, s2), mul_h(model, s1, s)
    # the vacant sub-double-groupoid, with its own products
    e0 = vacant_embedding(model, a0, pt)
    va = GammaElement(a1.h, a1.p, a1.u)
    e1 = vacant_embedding(model, va, psi_minus(model, a0, a0.h, pt))
    e2 = vacant_embedding(model, psi_plus(model, a0.h, a0.h, pt, a0), pt2)
    return [
        _res("double.alpha_h_multiplicative", x_gap(alpha_h(model, sv),
                                                    multiply(alpha_h(model, s), alpha_h(model, s2))), tol, point),
        _res("double.beta_h_multiplicative", x_gap(beta_h(model, sv), multiply(pt, pt2)), tol, point),
        _res("double.alpha_v_multiplicative", gamma_gap(model, alpha_v(model, sh), gamma_mul(model, a1, a0)),
             tol, point),
        _res("double.beta_v_multiplicative",
             gamma_gap(model, beta_v(model, sh), gamma_mul(model, beta_v(model, s1), beta_v(model, s))), tol, point),
        _res("double.inv_v_multiplicative",
             square_gap(model, inv_v(model, sh), mul_h(model, inv_v(model, s1), inv_v(model, s))), tol, point),
        _res("double.inv_h_multiplicative",
             square_gap(model, inv_h(model, sv), mul_v(model, inv_h(model, s), inv_h(model, s2))), tol, point),
        _res("double.unit_h_multiplicative",
             square_gap(model, unit_h(model, multiply(pt, pt2)), mul_v(model, unit_h(model, pt), unit_h(model, pt2))),
             tol, point),
        _res("double.unit_v_multiplicative",
             square_gap(model, unit_v(model, gamma_mul(model, a1, a0)),
                        mul_h(model, unit_v(model, a1), unit_v(model, a0))), tol, point),
        _res("double.inverse_h", square_gap(model, mul_h(model, inv_h(model, s), s), unit_h(model, pt)), tol, point),
        _res("double.inverse_v", square_gap(model, mul_v(model, s, inv_v(model, s)), unit_v(model, a0)), tol, point),
        _res("double.unit_h_sides",
             x_gap(alpha_h(model, unit_h(model, pt)), pt) + gamma_gap(model, beta_v(model, unit_h(model, pt)),
                                                                       gamma_unit(model, pt.q)), tol, point),
        _res("double.unit_v_sides",
             gamma_gap(model, beta_v(model, unit_v(model, a0)), a0)
             + x_gap(alpha_h(model, unit_v(model, a0)), _x_unit(model, gamma_alpha(model, a0))), tol, point),
        _res("vacant.horizontal",
             square_gap(model, mul_h(model, e1, e0), vacant_embedding(model, gamma_mul(model, va, a0), pt)), tol, point),
        _res("vacant.vertical",
             square_gap(model, mul_v(model, e0, e2), vacant_embedding(model, a0, multiply(pt, pt2))), tol, point),
    ]


def sprime_residuals(model, s, h1, k1, u1, l, r_, g2, tol=1e-9):
    """ρ bijectivity and multiplicativity, and the groupoid laws of S′ ⇉ X."""
    point = serialize_point(p=s.p, q=s.q, g=s.g)
    t = product_right_partner(model, s, l, r_, g2)
    left = sprime_left_partner(model, s, h1, k1, u1)
    lefter = sprime_left_partner(model, left, k1, h1, model.inv(u1))
    a, b = sprime_alpha(model, s), sprime_beta(model, s)
    return [
        _res("rho.inverse", sprime_gap(rho_inverse(model, rho(model, s)), s), tol, point),
        _res("rho.multiplicative", square_gap(model, rho(model, product_mul(model, s, t)),
                                              mul_v(model, rho(model, s), rho(model, t))), tol, point),
        _res("rho.target", gamma_gap(model, beta_v(model, rho(model, s)), product_target(model, s)), tol, point),
        _res("sprime.associativity",
             sprime_gap(sprime_mul(model, sprime_mul(model, lefter, left), s),
                        sprime_mul(model, lefter, sprime_mul(model, left, s))), tol, point),
        _res("sprime.source_of_product", x_gap(sprime_alpha(model, sprime_mul(model, left, s)),
                                               sprime_alpha(model, left)), tol, point),
        _res("sprime.target_of_product", x_gap(sprime_beta(model, sprime_mul(model, left, s)), b), tol, point),
        _res("sprime.left_unit", sprime_gap(sprime_mul(model, sprime_unit(model, a), s), s), tol, point),
        _res("sprime.right_unit", sprime_gap(sprime_mul(model, s, sprime_unit(model, b)), s), tol, point),
        _res("sprime.unit_sides", x_gap(sprime_alpha(model, sprime_unit(model, b)), b)
             + x_gap(sprime_beta(model, sprime_unit(model, b)), b), tol, point),
    ]


def x_bivector(model):
    """The Poisson structure on X matched with S′: the coboundary groupoid for −R."""
    from .dynrmat import ConstantR
    from .pgroupoid import BivectorX, CoboundaryCocycle
    return BivectorX(CoboundaryCocycle(ConstantR(model.algebra, -model.R)))


def symplectic_checks(model, s, phi, psi, unit_pt, tol=1e-6, step=DEFAULT_FD_STEP, biv=None):
    """Polarity, α Poisson, β anti-Poisson, nondegeneracy and ε(X) Lagrangian at s."""
    from .pgroupoid import annihilator, poisson_bracket_X
    biv = x_bivector(model) if biv is None else biv
    m = sprime_bivector(model, s, step)
    pa = lambda f: lambda t: f(sprime_alpha(model, t))
    pb = lambda f: lambda t: f(sprime_beta(model, t))
    br = lambda f, f2: sprime_bracket(model, f, f2, s, step, m)
    point = serialize_point(p=s.p, q=s.q, g=s.g)
    sv = np.linalg.svd(m, compute_uv=False)
    n_ann = annihilator(sprime_unit_tangent(model))
    mu = sprime_bivector(model, sprime_unit(model, unit_pt), step)
    return [
        _res("sprime.antisymmetry", magnitude(m + m.T), tol, point),
        _res("sprime.polarity", abs(br(pa(phi), pb(psi))), tol, point),
        _res("sprime.alpha_poisson",
             abs(br(pa(phi), pa(psi)) - poisson_bracket_X(phi, psi, sprime_alpha(model, s), biv)), tol, point),
        _res("sprime.beta_anti_poisson",
             abs(br(pb(phi), pb(psi)) + poisson_bracket_X(phi, psi, sprime_beta(model, s), biv)), tol, point),
        _res("sprime.rank_deficit", m.shape[0] - int(np.sum(sv > 1e-8 * sv[0])), 0.0, point),
        _res("sprime.unit_isotropic", magnitude(n_ann.T @ mu @ n_ann), tol, point),
        _res("sprime.unit_half_dimension", abs(2 * n_ann.shape[1] - m.shape[0]), 0.0, point),
    ]


def gradient_identity_residuals(model, s, phi, tol=1e-6, step=DEFAULT_FD_STEP):
    """Gradients of α*φ and β*φ on S′ against their closed forms in the gradients of φ."""
    g = model.algebra
    y, v = _twist(model, s)
    xa, xb = sprime_alpha(model, s), sprime_beta(model, s)
    ga = sprime_gradient(model, lambda t: phi(sprime_alpha(model, t)), s, step)
    gb = sprime_gradient(model, lambda t: phi(sprime_beta(model, t)), s, step)
    d1, D, d2, _ = phi.partials(xa, g)
    e1, E, e2, Ep = phi.partials(xb, g)
    i, ir = g.embed_h, g.restrict_h
    lp = lambda z, w: lambda_plus(model, z, w, step)
    point = serialize_point(p=s.p, q=s.q, g=s.g)
    vals = {
        "alpha.torus_source": ga.D1 - h_ad_star(g, ga.d1, s.p),
        "alpha.torus_target": ga.D2 - h_ad_star(g, ga.d2, s.q),
        "alpha.dual_left": ga.Dsp - g.Ad(y @ s.h) @ i(ga.d1) - g.Ad(s.k) @ i(ga.d2),
        "beta.torus_source": gb.D1 + ir(gb.D),
        "beta.torus_target": gb.D2 - ir(gb.Dp) + ir(lp(gb.Dsp, s.u)),
        "beta.dual_right": gb.Ds - lambda_minus(model, gb.D, s.g, step, "left"),
        "alpha.source_shift": ga.d1 - ir(g.Ad(_inv(s.h)) @ i(d1)),
        "alpha.target_shift": ga.d2 - ir(g.Ad(_inv(s.k)) @ i(d2)),
        "alpha.group_gradient": ga.D - D + lp(i(d1), v),
        "alpha.dual_gradient": ga.Ds - i(d2) - model.Ad(model.inv(s.u)).T @ g.Ad(y) @ i(d1),
        "alpha.dual_gradient_expanded": ga.Ds - i(d2) - g.Ad(_inv(s.g)) @ i(d1)
        + lambda_minus(model, lp(i(d1), v), s.g, step, "left"),
        "beta.source_shift": gb.d1 - e1,
        "beta.target_shift": gb.d2 - e2,
        "beta.torus_source_closed": gb.D1 + ir(E),
        "beta.torus_target_closed": gb.D2 - ir(Ep),
        "beta.group_gradient": gb.D - model.Ad(model.inv(v)) @ g.Ad(_inv(s.h)).T @ E,
        "beta.dual_gradient": gb.Dsp + lambda_minus(model, g.Ad(_inv(s.k)).T @ Ep, y, step),
    }
    return [_res("gradient." + k, magnitude(val), tol, point) for k, val in vals.items()]


# --------------------------------------------------------------------------
# leaves and reduction

def leaves(model, pt, group_samples, biv=None, step=DEFAULT_FD_STEP, threshold=1e-8):
    """Orbit points under Ψ̃⁻ and the rank/inclusion table at pt."""
    biv = x_bivector(model) if biv is None else biv
    orbit = [leaf_action(model, k, h, u, pt) for k, h, u in group_samples]
    rank_m, rank_t, incl = leaf_tangency(model, biv, pt, step, threshold)
    return orbit, dict(rank_bivector=rank_m, rank_orbit=rank_t, inclusion=incl)


def poisson_action_residual(model, f, f2, k, h, u, pt, biv=None, tol=1e-6, step=DEFAULT_FD_STEP):
    """{f∘Ψ̃, f′∘Ψ̃} on (H × (H⋉G*)) × X against {f, f′}_X ∘ Ψ̃, relative to the bracket size."""
    from .pgroupoid import CallableFunction, cotangent, poisson_bracket_X
    g = model.algebra
    biv = x_bivector(model) if biv is None else biv
    eye = np.eye(g.dim)

    def group_grad(fn):
        return np.array([complex(central(lambda t, e=e: fn(leaf_action(model, k, h, model.mul(u, model.exp(t * e)),
                                                                        pt)), step)) for e in eye])

    def x_grad(fn):
        return cotangent(CallableFunction(lambda q: fn(leaf_action(model, k, h, u, q)), step), pt, g)

    m = biv.matrix(pt)
    lhs = group_grad(f) @ pi_star_left(model, u, step) @ group_grad(f2) + x_grad(f) @ m @ x_grad(f2)
    rhs = poisson_bracket_X(f, f2, leaf_action(model, k, h, u, pt), biv)
    scale = max(1.0, abs(rhs))
    return _res("leaves.poisson_action", abs(lhs - rhs) / scale, tol, pt.as_point())


def conjugation_action(h, pt):
    """h·(p,g,q) = (Ad*_{h⁻¹}p, hgh⁻¹, Ad*_{h⁻¹}q); the coadjoint part is trivial for the torus."""
    from .pgroupoid import GroupoidPoint
    return GroupoidPoint(pt.p, h @ pt.x @ _inv(h), pt.q)


def momentum_J(pt):
    return np.asarray(pt.p) - np.asarray(pt.q)


def reduction_J(model, pt, z, f, inv_funcs, biv=None, tol=1e-6, step=DEFAULT_FD_STEP):
    """Momentum map and extension-independence residuals for J = α − β.

    ``inv_funcs`` is a list of (f, ext1, ext2): an H-invariant function and two
    invariant extensions that agree with it on J⁻¹(0).  The base point pt must
    satisfy p = q.
    """
    from .pgroupoid import CallableFunction, cotangent
    g = model.algebra
    biv = x_bivector(model) if biv is None else biv
    point = pt.as_point()
    if not hasattr(f, "partials"):
        f = CallableFunction(f, step)
    m = biv.matrix(pt)
    dj = np.concatenate([z, np.zeros(g.dim), -z])
    gen = complex(central(lambda t: f(conjugation_action(mat_exp(t * g.cartan_element(z)), pt)), step))
    out = [_res("reduction.momentum", abs(cotangent(f, pt, g) @ m @ dj - gen), tol, point)]
    h = mat_exp(g.cartan_element(z))
    out.append(_res("reduction.equivariance", magnitude(momentum_J(conjugation_action(h, pt))
                                                        - h_coad(g, _inv(h), momentum_J(pt))), tol, point))
    worst = 0.0
    for (f1, a1, b1), (f2, a2, b2) in zip(inv_funcs, inv_funcs[1:] + inv_funcs[:1]):
        ca = [cotangent(CallableFunction(fn, step), pt, g) for fn in (a1, a2, b1, b2)]
        worst = max(worst, abs(ca[0] @ m @ ca[1] - ca[2] @ m @ ca[3]))
    out.append(_res("reduction.extension_independence", worst, tol, point))
    out.append(_res("reduction.unit_level", magnitude(momentum_J(_x_unit(model, pt.p))), tol, point))
    return out


def invariant_function_family(algebra, rng, count=3):
    """H-invariant polynomials of (p, q, g) and two invariant extensions of each off J⁻¹(0).

    Invariants: p, q, diagonal entries of g and products g_ij g_ji.
    """
    n, r = algebra.n, algebra.rank
    out = []
    for _ in range(count):
        c = rng.standard_normal(4)
        i, j = rng.integers(n), rng.integers(n)
        wp, wq = rng.standard_normal(r), rng.standard_normal(r)
        w1, w2 = rng.standard_normal(r), rng.standard_normal(r)

        def base(pt, c=c, i=i, j=j, wp=wp, wq=wq):
            x = pt.x
            return (c[0] * x[i, i] + c[1] * x[i, j] * x[j, i] + c[2] * (wp @ pt.p) * x[j, j]
                    + c[3] * (wq @ pt.q) ** 2)

        def ext1(pt, base=base, w1=w1, i=i):
            return base(pt) + (w1 @ momentum_J(pt)) * pt.x[i, i]

        def ext2(pt, base=base, w2=w2, j=j):
            d = momentum_J(pt)
            return base(pt) + (w2 @ d) * pt.x[j, j] ** 2 + (w2 @ d) ** 2

        out.append((base, ext1, ext2))
    return out


def sigma_residuals(model, p, q, r_, k1, k2, u1, u2, tol=1e-9):
    """Σ sends the pair-groupoid-with-group structure into Γ: sides and products."""
    s1 = sigma_trivialization(model, p, k1, u1, q)
    s2 = sigma_trivialization(model, q, k2, u2, r_)
    s12 = sigma_trivialization(model, p, k1 @ k2, model.mul(u1, phi_plus(model, _inv(k1), u2)), r_)
    point = serialize_point(p=p, q=q)
    return [
        _res("sigma.source", magnitude(gamma_alpha(model, s1) - p), tol, point),
        _res("sigma.target", magnitude(gamma_beta(model, s1) - q), tol, point),
        _res("sigma.multiplicative", gamma_gap(model, gamma_mul(model, s1, s2), s12), tol, point),
    ]


def sample_kernel_dual(model, rng, scale=0.4):
    """u ∈ G* with I*(u) = 0: the exponential of a covector with no Cartan part."""
    xi = small_vector(rng, model.algebra.dim, scale)
    xi[:model.algebra.rank] = 0
    return model.exp(xi)
