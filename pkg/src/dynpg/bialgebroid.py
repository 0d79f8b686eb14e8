"""Tangent Lie bialgebroid of the coboundary groupoid, its vertex algebras and their trivialization.

Sections of U×h*×g (carrier A) and of U×h×g* (carrier A*) are maps
q ↦ v(q) ∈ C^{r+dim}: the first r slots hold the h* (resp. h) part, the rest
the g (resp. g*) part.  ``jac(q)`` is the (r+dim, r) matrix of derivatives
along the coordinate directions of h*.

The A*-bracket is implemented twice: from the duality pairing with generic
cocycle data (``bracket_Astar``, covector coordinates) and from the
Killing-identified closed form (``bracket_Astar_killing``, vector
coordinates).  Each is the other's oracle.

Elements of g′ = l_Γ ⋉ (h_Γ^⊥ ⋉ (n̄⁺ ⊖ n̄⁻)) and of the vertex algebra 𝒱_q use
the same coordinate layout as g: Cartan slots first, then root slots.
"""
from dataclasses import dataclass

import numpy as np

from .liealg import SimpleLieAlgebra
from .numerics import curve_derivative
from .residual import Residual, magnitude, serialize_point


# --------------------------------------------------------------------------
# sections

class Section:
    def value(self, q):
        raise NotImplementedError

    def jac(self, q):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class PolySection(Section):
    """value(q) = c0 + c1 q + c2[q, q] with c2 symmetric in its last two slots."""

    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    @classmethod
    def random(cls, size, rank, rng, degree=2, scale=0.5):
        c0 = (rng.standard_normal(size) * scale).astype(np.complex128)
        c1 = np.zeros((size, rank), dtype=np.complex128)
        c2 = np.zeros((size, rank, rank), dtype=np.complex128)
        if degree >= 1:
            c1 = (rng.standard_normal((size, rank)) * scale).astype(np.complex128)
        if degree >= 2:
            a = rng.standard_normal((size, rank, rank)) * scale
            c2 = (0.5 * (a + a.transpose(0, 2, 1))).astype(np.complex128)
        return cls(c0, c1, c2)

    @classmethod
    def constant(cls, v, rank):
        v = np.asarray(v, dtype=np.complex128)
        return cls(v, np.zeros((v.size, rank), dtype=np.complex128),
                   np.zeros((v.size, rank, rank), dtype=np.complex128))

    def value(self, q):
        q = np.asarray(q)
        return self.c0 + self.c1 @ q + np.einsum("mij,i,j->m", self.c2, q, q)

    def jac(self, q):
        return self.c1 + 2.0 * np.einsum("mij,j->mi", self.c2, np.asarray(q))

    def mapped(self, m):
        """Section q ↦ m @ value(q) for a constant matrix m."""
        return PolySection(m @ self.c0, m @ self.c1, np.einsum("ab,bij->aij", m, self.c2))


@dataclass(frozen=True, eq=False)
class FunctionSection(Section):
    """Section from callables; the jacobian falls back to Richardson differences."""

    value_fn: object
    jac_fn: object = None
    rank: int = 1
    step: float = 1e-4

    def value(self, q):
        return np.asarray(self.value_fn(np.asarray(q)))

    def jac(self, q):
        if self.jac_fn is not None:
            return np.asarray(self.jac_fn(np.asarray(q)))
        q = np.asarray(q, dtype=np.complex128)
        eye = np.eye(self.rank)
        cols = [curve_derivative(lambda t, i=i: self.value_fn(q + t * eye[i]), 1e-5).value
                for i in range(self.rank)]
        return np.array(cols).T


@dataclass(frozen=True, eq=False)
class ScaledSection(Section):
    """f · s for a polynomial scalar f on h* given by value and gradient callables."""

    f: object
    grad_f: object
    s: Section

    def value(self, q):
        return self.f(q) * self.s.value(q)

    def jac(self, q):
        return np.outer(self.s.value(q), self.grad_f(q)) + self.f(q) * self.s.jac(q)


# --------------------------------------------------------------------------
# the algebroid A = U×h*×g

def anchor_A(q, lam, x):
    return q, lam


def bracket_A(s1, s2, q, struct, rank):
    """[(λ,X),(λ′,X′)] = (dλ′·λ − dλ·λ′, dX′·λ − dX·λ′ + [X,X′])."""
    v1, v2 = s1.value(q), s2.value(q)
    j1, j2 = s1.jac(q), s2.jac(q)
    lam1, lam2 = v1[:rank], v2[:rank]
    x1, x2 = v1[rank:], v2[rank:]
    out_lam = j2[:rank] @ lam1 - j1[:rank] @ lam2
    out_x = j2[rank:] @ lam1 - j1[rank:] @ lam2 + np.einsum("i,j,ijk->k", x1, x2, struct)
    return np.concatenate([out_lam, out_x])


# --------------------------------------------------------------------------
# the dual algebroid A* = U×h×g*

@dataclass(frozen=True, eq=False)
class AlgebroidData:
    """Everything the pairing formula for the A*-bracket needs.

    struct: Lie algebra structure tensor; inclusion: (dim, r) matrix of A;
    d_source(q, Λ), d_group(q, Y): cocycle partials at (q,1,q), as operators
    from covector coordinates to vector coordinates.
    """

    struct: np.ndarray
    inclusion: np.ndarray
    d_source: object
    d_group: object

    @property
    def rank(self):
        return self.inclusion.shape[1]

    @property
    def dim(self):
        return self.inclusion.shape[0]

    def ad(self, x):
        return np.einsum("i,ijk->kj", x, self.struct)

    def K(self, q):
        """K(q)Z = ad*_Z q on h*; zero because the Cartan subalgebra is abelian."""
        return np.zeros((self.rank, self.rank), dtype=np.complex128)


def coboundary_data(r):
    g = r.algebra
    inc = np.zeros((g.dim, g.rank))
    inc[:g.rank] = np.eye(g.rank)

    def d_source(q, lam):
        return -r.dR(q, lam)

    def d_group(q, y):
        m = r.R(q)
        ad = g.ad(y)
        return ad @ m + m @ ad.T

    return AlgebroidData(g.struct, inc, d_source, d_group)


def anchor_Astar(q, z, b, data):
    return -data.K(q) @ z + data.inclusion.T @ b


def bracket_Astar(s1, s2, q, data):
    """[(Z,B),(Z′,B′)]_* in covector coordinates, from the duality pairing with A."""
    r, dim = data.rank, data.dim
    v1, v2 = s1.value(q), s2.value(q)
    j1, j2 = s1.jac(q), s2.jac(q)
    z1, b1 = v1[:r], v1[r:]
    z2, b2 = v2[:r], v2[r:]
    kq = data.K(q)
    move1 = kq @ z1 - data.inclusion.T @ b1     # K(q)Z − A*B
    move2 = kq @ z2 - data.inclusion.T @ b2
    eye_r, eye_g = np.eye(r), np.eye(dim)
    out_z = -j2[:r] @ move1 + j1[:r] @ move2
    for i in range(r):
        # −⟨Z′, dK(Λ)Z⟩ with dK(Λ) = K(Λ) (K is linear in q)
        out_z[i] += -z2 @ (data.K(eye_r[i]) @ z1) - b1 @ (data.d_source(q, eye_r[i]) @ b2)
    out_b = j1[r:] @ move2 - j2[r:] @ move1
    out_b = out_b + data.ad(data.inclusion @ z1).T @ b2 - data.ad(data.inclusion @ z2).T @ b1
    for k in range(dim):
        out_b[k] += b1 @ (data.d_group(q, eye_g[k]) @ b2)
    return np.concatenate([out_z, out_b])


def bracket_Astar_killing(s1, s2, q, r):
    """The same bracket in Killing-identified vector coordinates.

    (dZ′ ι*B − dZ ι*B′ − (dR(·)B, B′), −dB ι*B′ + dB′ ι*B − [RB + Z, B′] − [B, RB′ + Z′]).
    """
    g = r.algebra
    rank = g.rank
    v1, v2 = s1.value(q), s2.value(q)
    j1, j2 = s1.jac(q), s2.jac(q)
    z1, b1 = v1[:rank], v1[rank:]
    z2, b2 = v2[:rank], v2[rank:]
    kil = g.killing
    rs = r.R(q) @ kil          # R acting on Killing-identified vectors
    i1, i2 = (kil @ b1)[:rank], (kil @ b2)[:rank]
    out_z = j2[:rank] @ i1 - j1[:rank] @ i2
    for i in range(rank):
        out_z[i] -= b2 @ kil @ (r.dR(q, np.eye(rank)[i]) @ kil @ b1)
    out_b = -j1[rank:] @ i2 + j2[rank:] @ i1
    out_b = out_b - g.bracket(rs @ b1 + g.embed_h(z1), b2) - g.bracket(b1, rs @ b2 + g.embed_h(z2))
    return np.concatenate([out_z, out_b])


def killing_to_covector(v, g):
    return np.concatenate([v[:g.rank], g.killing @ v[g.rank:]])


def covector_to_killing(v, g):
    return np.concatenate([v[:g.rank], g.killing_inv @ v[g.rank:]])


def bracket_section(s1, s2, fn, rank):
    """The section q ↦ fn(s1, s2, q), with a finite-difference jacobian."""
    return FunctionSection(lambda q: fn(s1, s2, q), None, rank)


def vector_field_bracket(v1, j1, v2, j2):
    """[V, W] = dW·V − dV·W for vector fields on h*."""
    return j2 @ v1 - j1 @ v2


def bialgebroid_morphism_residual(q, b, b2, z, data, tol=1e-9):
    """⟨B, ∂P(ιZ)B′ − δ₁P(ad*_Z q)B′⟩ for constant A = ι."""
    adzq = data.K(q) @ z
    val = b @ (data.d_group(q, data.inclusion @ z) - data.d_source(q, adzq)) @ b2
    return Residual("bialgebroid.morphism", abs(val), tol, serialize_point(q=q, z=z))


# --------------------------------------------------------------------------
# vertex algebra, g′ and ψ(q)

@dataclass(frozen=True, eq=False)
class VertexAlgebra:
    q: np.ndarray
    table: np.ndarray      # table[u, v, w]: [u, v] = Σ_w table[u,v,w] w in the basis (x_i, e_α)
    rescaling: np.ndarray  # ψ_α(q): E_α(q) = e_α / ψ_α

    def jacobi_residual(self):
        c = self.table
        t = (np.einsum("jkm,iml->ijkl", c, c) + np.einsum("kim,jml->ijkl", c, c)
             + np.einsum("ijm,kml->ijkl", c, c))
        return magnitude(t)

    def antisymmetry_residual(self):
        return magnitude(self.table + self.table.transpose(1, 0, 2))


def vertex_bracket(q, r):
    """Structure constants of ker a_* at q, computed from the A*-bracket of constant sections."""
    g = r.algebra
    dim, rank = g.dim, g.rank
    data = coboundary_data(r)
    basis = []
    for u in range(dim):
        v = np.zeros(rank + dim, dtype=np.complex128)
        if u < rank:
            v[u] = 1.0
        else:
            v[rank + u] = 1.0
        basis.append(PolySection.constant(killing_to_covector(v, g), rank))
    table = np.zeros((dim, dim, dim), dtype=np.complex128)
    for u in range(dim):
        for w in range(dim):
            out = covector_to_killing(bracket_Astar(basis[u], basis[w], q, data), g)
            z, vec = out[:rank], out[rank:]
            coords = vec.copy()
            coords[:rank] = z + vec[:rank]   # vec[:rank] must vanish on ker a_*
            table[u, w] = coords
    return VertexAlgebra(np.asarray(q), table, psi_values(q, r))


def psi_values(q, r):
    """ψ_α(q) for every root: -1/(2 sinh((α,q-μ)/2)) on ⟨Γ⟩, -e^{∓(α,q-μ)/2} on Γ̄±."""
    x = r.root_arguments(q)
    out = np.empty(r.algebra.n_roots, dtype=np.complex128)
    out[r.bar_plus] = -np.exp(-x[r.bar_plus] / 2.0)
    out[r.bar_minus] = -np.exp(x[r.bar_minus] / 2.0)
    span = r.span
    out[span] = -1.0 / (2.0 * np.sinh(x[span] / 2.0))
    return out


def psi(q, r):
    """ψ(q): 𝒱_q → g′ as a matrix in the (x_i, e_α) layout."""
    g = r.algebra
    return np.diag(np.concatenate([-np.ones(g.rank), psi_values(q, r)]))


def psi_inverse_derivative(q, r, lam):
    """d(ψ^{-1})(q)(λ) on n: e_α ↦ φ_α ψ_α^{-1} (α, λ) e_α (zero on h)."""
    g = r.algebra
    vals = r.phis(q) / psi_values(q, r) * (g.root_h @ np.asarray(lam))
    return np.diag(np.concatenate([np.zeros(g.rank), vals]))


def psi_derivative(q, r, lam):
    g = r.algebra
    vals = -r.phis(q) * psi_values(q, r) * (g.root_h @ np.asarray(lam))
    return np.diag(np.concatenate([np.zeros(g.rank), vals]))


def psi_adjoint(q, r):
    """ψ* on n with respect to the Killing form: e_α ↦ ψ_{-α} e_α."""
    g = r.algebra
    rs = g.rootsystem
    pv = psi_values(q, r)
    return np.diag(np.concatenate([np.zeros(g.rank), [pv[rs.negate(k)] for k in range(g.n_roots)]]))


def psi_adjoint_derivative(q, r, lam):
    g = r.algebra
    rs = g.rootsystem
    d = np.diag(psi_derivative(q, r, lam))[g.rank:]
    return np.diag(np.concatenate([np.zeros(g.rank), [d[rs.negate(k)] for k in range(g.n_roots)]]))


@dataclass(frozen=True, eq=False)
class GPrime:
    algebra: SimpleLieAlgebra
    gamma: tuple
    struct: np.ndarray

    def bracket(self, x, y):
        return np.einsum("i,j,ijk->k", x, y, self.struct)

    def jacobi_residual(self):
        c = self.struct
        t = (np.einsum("jkm,iml->ijkl", c, c) + np.einsum("kim,jml->ijkl", c, c)
             + np.einsum("ijm,kml->ijkl", c, c))
        return magnitude(t)

    def ad(self, x):
        return np.einsum("i,ijk->kj", x, self.struct)


def build_gprime(algebra, gamma):
    """Structure constants of l_Γ ⋉ (h_Γ^⊥ ⋉ (n̄⁺ ⊖ n̄⁻)) on the basis (x_i, e_α).

    Cartan basis vectors are split into their h_Γ and h_Γ^⊥ components; the
    l_Γ part (h_Γ and ⟨Γ⟩-root vectors) brackets as in g, acts on the ideal by
    ad, and inside the ideal n̄⁺ brackets as in g, n̄⁻ with the opposite sign,
    and n̄⁺ with n̄⁻ to zero.
    """
    g = algebra
    rs = g.rootsystem
    dim, rank = g.dim, g.rank
    span = set(rs.span(gamma))
    bar_plus = set(rs.gamma_bar_plus(gamma))
    hg = np.array([g.root_h[rs.index(tuple(int(i == j) for j in range(rank)))] for i in gamma]).reshape(-1, rank)
    proj_hg = hg.T @ np.linalg.pinv(hg.T) if len(gamma) else np.zeros((rank, rank))

    # decompose each basis vector into labelled pieces
    def pieces(u):
        if u < rank:
            e = np.eye(rank)[u]
            a = proj_hg @ e
            return [("l", g.embed_h(a)), ("hperp", g.embed_h(e - a))]
        k = u - rank
        v = np.zeros(dim, dtype=np.complex128)
        v[u] = 1.0
        if k in span:
            return [("l", v)]
        return [("plus" if k in bar_plus else "minus", v)]

    def piece_bracket(lab1, v1, lab2, v2):
        if lab1 == "l" or lab2 == "l":
            return g.bracket(v1, v2)
        if lab1 == "hperp" or lab2 == "hperp":
            return g.bracket(v1, v2)
        if lab1 == lab2 == "plus":
            return g.bracket(v1, v2)
        if lab1 == lab2 == "minus":
            return -g.bracket(v1, v2)
        return np.zeros(dim, dtype=np.complex128)

    struct = np.zeros((dim, dim, dim), dtype=np.complex128)
    for u in range(dim):
        for w in range(dim):
            tot = np.zeros(dim, dtype=np.complex128)
            for l1, v1 in pieces(u):
                for l2, v2 in pieces(w):
                    tot += piece_bracket(l1, v1, l2, v2)
            struct[u, w] = tot
    return GPrime(algebra, tuple(gamma), struct)


def psi_iso_residual(q, r, gprime=None, tol=1e-9):
    """max |ψ[u,v]_𝒱 − [ψu, ψv]_{g′}| over basis pairs."""
    gp = gprime or build_gprime(r.algebra, r.gamma)
    va = vertex_bracket(q, r)
    m = psi(q, r)
    lhs = np.einsum("uvw,kw->uvk", va.table, m)
    rhs = np.einsum("au,bv,abk->uvk", m, m, gp.struct)
    return Residual("psi.isomorphism", magnitude(lhs - rhs), tol, serialize_point(q=q))


# --------------------------------------------------------------------------
# flat connection θ* and the trivialization σ / τ

def theta_star(q, lam, r):
    """θ*(q, λ) = (−C#(q)λ, λ) in Killing-identified vector coordinates."""
    g = r.algebra
    return np.concatenate([-r.C_sharp(q) @ lam, g.embed_h(lam)])


def connection_residuals(q, r, lam, lam2, nvec, tol=1e-9):
    """The four conditions making θ* a flat connection compatible with ψ."""
    g = r.algebra
    rank = g.rank
    kil = g.killing
    R = r.R(q)
    eye = np.eye(rank)
    f = -r.C_sharp(q)

    def df(v):
        return -r.twoform.derivative(v)

    # curvature: df(λ′)λ − df(λ)λ′ + (dR(·)λ, λ′) = 0 in h
    c1 = df(lam2) @ lam - df(lam) @ lam2
    c1 = c1 + np.array([lam2 @ (r.dR(q, eye[i])[:rank, :rank] @ lam) for i in range(rank)])
    # Cartan commutation: [Rλ, λ′] + [λ, Rλ′] = 0
    il, il2 = g.embed_h(lam), g.embed_h(lam2)
    c2 = g.bracket(R @ kil @ il, il2) + g.bracket(il, R @ kil @ il2)
    # Cartan pairing: (dR(·)λ, n) = 0
    c3 = np.array([nvec @ kil @ (r.dR(q, eye[i]) @ kil @ il) for i in range(rank)])
    # transport: dψ^{-1}(λ)n − [f(λ), ψ^{-1}n] − ([Rλ, ψ^{-1}n] + [λ, Rψ^{-1}n]) = 0
    pinv = np.linalg.inv(psi(q, r))
    nn = pinv @ nvec
    c4 = (psi_inverse_derivative(q, r, lam) @ nvec - g.bracket(g.embed_h(f @ lam), nn)
          - (g.bracket(R @ kil @ il, nn) + g.bracket(il, R @ kil @ nn)))
    pt = serialize_point(q=q)
    return [Residual("connection.curvature", magnitude(c1), tol, pt),
            Residual("connection.cartan_commutation", magnitude(c2), tol, pt),
            Residual("connection.cartan_pairing", magnitude(c3), tol, pt),
            Residual("connection.transport", magnitude(c4), tol, pt)]


def project_h(v, rank):
    out = np.zeros_like(v)
    out[:rank] = v[:rank]
    return out


def project_n(v, rank):
    out = np.array(v, copy=True)
    out[:rank] = 0
    return out


def sigma(q, lam, xi, r):
    """σ(q, λ, ξ) = θ*(q,λ) + ψ̃(q,ξ), ψ̃(q,ξ) = (−Π_h ξ, ψ^{-1}(q) Π_n ξ)."""
    g = r.algebra
    rank = g.rank
    pinv = np.linalg.inv(psi(q, r))
    out = theta_star(q, lam, r)
    out[:rank] += -xi[:rank]
    out[rank:] += pinv @ project_n(xi, rank)
    return out


def tau(q, z, b, r):
    """τ(q, Z, λ+n) = (λ, −C#(q)λ − Z + ψ(q)n)."""
    g = r.algebra
    rank = g.rank
    lam = b[:rank]
    xi = psi(q, r) @ project_n(b, rank)
    xi[:rank] = -r.C_sharp(q) @ lam - z
    return np.concatenate([lam, xi])


def trivialization(q, z, b, r):
    return tau(q, z, b, r)


def sigma_section(s, r):
    """Push a section (λ, ξ) of U×h*×g′ through σ, with exact jacobian."""
    g = r.algebra
    rank = g.rank

    def value(q):
        v = s.value(q)
        return sigma(q, v[:rank], v[rank:], r)

    def jac(q):
        v, jv = s.value(q), s.jac(q)
        lam, xi = v[:rank], v[rank:]
        pinv = np.linalg.inv(psi(q, r))
        cols = []
        for i in range(rank):
            e = np.eye(rank)[i]
            dlam, dxi = jv[:rank, i], jv[rank:, i]
            dz = -r.twoform.derivative(e) @ lam - r.C_sharp(q) @ dlam - dxi[:rank]
            db = g.embed_h(dlam) + psi_inverse_derivative(q, r, e) @ project_n(xi, rank) \
                + pinv @ project_n(dxi, rank)
            cols.append(np.concatenate([dz, db]))
        return np.array(cols).T

    return FunctionSection(value, jac, rank)


def trivialization_morphism_residual(s1, s2, q, r, gprime, tol=1e-7):
    """σ[s1, s2]_{A′} − [σ s1, σ s2]_* on sections of U×h*×g′."""
    rank = r.algebra.rank
    lhs_in = bracket_A(s1, s2, q, gprime.struct, rank)
    lhs = sigma(q, lhs_in[:rank], lhs_in[rank:], r)
    rhs = bracket_Astar_killing(sigma_section(s1, r), sigma_section(s2, r), q, r)
    return Residual("trivialization.intertwining", magnitude(lhs - rhs), tol, serialize_point(q=q))


# --------------------------------------------------------------------------
# the dual cocycle P′ and its pieces

def _bilinear_operator(pair, kil_inv):
    """Operator O (g′ → g′, vector form) with K(a, O b) = pair[a, b]."""
    return kil_inv @ pair


def dual_delta1(q, r, lam):
    """δ₁P′(Λ) at (q, 1, q) as a vector-form operator on g′."""
    g = r.algebra
    rank, dim = g.rank, g.dim
    ps = psi_adjoint(q, r)
    pair = np.zeros((dim, dim), dtype=np.complex128)
    eye = np.eye(dim)
    for a in range(rank, dim):
        for b in range(rank, dim):
            br = g.bracket(ps @ eye[a], ps @ eye[b])
            pair[a, b] = br[:rank] @ lam
    dC = r.twoform.derivative
    for i in range(rank):
        for j in range(rank):
            li, lj = np.eye(rank)[i], np.eye(rank)[j]
            pair[i, j] = (dC(lj) @ li - dC(li) @ lj) @ lam
    return _bilinear_operator(pair, g.killing_inv)


def dual_dgroup(q, r, y):
    """∂P′(Y) at (q, 1, q) as a vector-form operator on g′; only the n-part of Y acts."""
    g = r.algebra
    rank, dim = g.rank, g.dim
    kil = g.killing
    nb = project_n(np.asarray(y, dtype=np.complex128), rank)
    ps = psi_adjoint(q, r)
    pinv = np.linalg.inv(psi(q, r))
    target = pinv @ nb
    eye = np.eye(dim)
    pair = np.zeros((dim, dim), dtype=np.complex128)
    for a in range(rank, dim):
        for b in range(rank, dim):
            br = project_n(g.bracket(ps @ eye[a], ps @ eye[b]), rank)
            pair[a, b] = -(br @ kil @ target)
    csharp = r.C_sharp(q)
    for i in range(rank):
        lam = np.eye(rank)[i]
        # d(ψ*^{-1})(λ) = −ψ*^{-1} dψ*(λ) ψ*^{-1} on n
        ps_inv = np.diag(np.concatenate([np.zeros(rank), 1.0 / np.diag(ps)[rank:]]))
        dps_inv = -ps_inv @ psi_adjoint_derivative(q, r, lam) @ ps_inv
        for b in range(rank, dim):
            val = -(dps_inv @ ps @ eye[b]) @ kil @ nb
            val -= g.bracket(g.embed_h(csharp @ lam), eye[b]) @ kil @ nb
            pair[i, b] = val
            pair[b, i] = -val
    return _bilinear_operator(pair, g.killing_inv)


def dual_cocycle(q, r, lam, y):
    """P′_*(q, Λ, Z+n) = −δ₁P′(Λ) + ∂P′(Z+n), vector form."""
    return -dual_delta1(q, r, lam) + dual_dgroup(q, r, y)


def dual_data(r, gprime):
    """AlgebroidData for U×h×g′* in covector coordinates of g′ ≅ g (vector space)."""
    g = r.algebra
    inc = np.zeros((g.dim, g.rank))
    inc[:g.rank] = np.eye(g.rank)
    kinv = g.killing_inv
    return AlgebroidData(gprime.struct, inc,
                         lambda q, lam: dual_delta1(q, r, lam) @ kinv,
                         lambda q, y: dual_dgroup(q, r, y) @ kinv)


def l_prime(q, q0, r):
    """l(q) on g′ (vector form), normalized by l(q0) = 0."""
    g = r.algebra
    rank = g.rank
    mu = r.mu
    roots = g.root_h
    vals = np.zeros(g.n_roots, dtype=np.complex128)
    ph, ph0 = r.phis(q), r.phis(q0)
    vals[r.span] = ph[r.span] - ph0[r.span]
    for k in r.bar_plus:
        b = roots[k]
        vals[k] = np.exp(b @ mu) * (np.exp(-(b @ q0)) - np.exp(-(b @ q)))
    for k in r.bar_minus:
        b = roots[k]
        vals[k] = np.exp(-(b @ mu)) * (np.exp(b @ q) - np.exp(b @ q0))
    out = np.zeros((g.dim, g.dim), dtype=np.complex128)
    out[:rank, :rank] = r.C_sharp(q) - r.C_sharp(q0)
    out[rank:, rank:] = np.diag(vals)
    return out


def dpi1(q0, r, nvec):
    """dπ(1)(𝐧) from the closed-form matrix entries, vector form on g′."""
    g = r.algebra
    rs = g.rootsystem
    rank, dim = g.rank, g.dim
    kil = g.killing
    pv = psi_values(q0, r)
    ph = r.phis(q0)
    csharp = r.C_sharp(q0)
    pair = np.zeros((dim, dim), dtype=np.complex128)
    for kb in range(g.n_roots):
        b = rank + kb
        eb = np.eye(dim)[b]
        pair_nb = eb @ kil @ nvec
        for i in range(rank):
            lam = np.eye(rank)[i]
            beta = g.root_h[kb]
            val = -(ph[kb] * (lam @ beta) + (csharp @ lam) @ beta) * pair_nb
            pair[i, b] = val
            pair[b, i] = -val
        for ka in range(g.n_roots):
            a = rank + ka
            ea = np.eye(dim)[a]
            br = g.bracket(ea, eb)
            ksum = rs.index(rs.roots[ka] + rs.roots[kb])
            if ksum is None:
                continue
            ratio = pv[rs.negate(ka)] * pv[rs.negate(kb)] / pv[rs.negate(ksum)]
            pair[a, b] = -ratio * (br @ kil @ nvec)
    return kil_inv_apply(pair, g)


def kil_inv_apply(pair, g):
    return g.killing_inv @ pair


def tau_star_value(q, v, r):
    """τ*(q, Z, λ+n) = (−λ, C#(q)λ + Z + ψ*(q)n) from U×h×g′* to U×h*×g."""
    g = r.algebra
    rank = g.rank
    z, b = v[:rank], v[rank:]
    lam = b[:rank]
    x = psi_adjoint(q, r) @ project_n(b, rank)
    x[:rank] = r.C_sharp(q) @ lam + z
    return np.concatenate([-lam, x])


def tau_star_section(s, r):
    g = r.algebra
    rank = g.rank

    def value(q):
        return tau_star_value(q, s.value(q), r)

    def jac(q):
        v, jv = s.value(q), s.jac(q)
        b = v[rank:]
        lam = b[:rank]
        cols = []
        for i in range(rank):
            e = np.eye(rank)[i]
            dz, db = jv[:rank, i], jv[rank:, i]
            dlam = db[:rank]
            dx = psi_adjoint_derivative(q, r, e) @ project_n(b, rank) + psi_adjoint(q, r) @ project_n(db, rank)
            dx[:rank] = r.twoform.derivative(e) @ lam + r.C_sharp(q) @ dlam + dz
            cols.append(np.concatenate([-dlam, dx]))
        return np.array(cols).T

    return FunctionSection(value, jac, rank)


def duality_residual(s1, s2, q, r, gprime, tol=1e-7):
    """τ*[s1, s2]′_* + [τ*s1, τ*s2]_{A} on sections of U×h×g′* (vector form)."""
    g = r.algebra
    rank = g.rank
    data = dual_data(r, gprime)
    c1 = s1.mapped(_killing_block(g)) if isinstance(s1, PolySection) else s1
    c2 = s2.mapped(_killing_block(g)) if isinstance(s2, PolySection) else s2
    out = covector_to_killing(bracket_Astar(c1, c2, q, data), g)
    lhs = tau_star_value(q, out, r)
    rhs = bracket_A(tau_star_section(s1, r), tau_star_section(s2, r), q, g.struct, rank)
    return Residual("duality.bracket", magnitude(lhs + rhs), tol, serialize_point(q=q))


def duality_anchor_residual(v, q, r):
    """−a(τ*(q, v)) − a′_*(q, v); exact by construction of the coordinates."""
    g = r.algebra
    rank = g.rank
    lhs = -tau_star_value(q, v, r)[:rank]
    rhs = (g.killing @ v[rank:])[:rank]
    return Residual("duality.anchor", magnitude(lhs - rhs), 1e-12, serialize_point(q=q))


def _killing_block(g):
    m = np.eye(g.rank + g.dim, dtype=np.complex128)
    m[g.rank:, g.rank:] = g.killing
    return m
