"""Root systems, Chevalley bases and pointwise Lie algebra arithmetic.

Coordinates.  Elements of g are complex vectors in the fixed basis
(x_1..x_r, e_α for α > 0, e_{-α} mirrored).  Covectors are vectors of values
on that basis, so ``xi @ x`` is the natural pairing.  The Cartan basis x_i is
Killing-orthonormal, which makes h ≅ h* the identity map in coordinates.

Two transposes appear throughout the package and are easy to confuse:
``coad(x) = -ad(x).T`` is the coadjoint action, while ``ad(x).T`` is the
plain dual map.  Formulas written with a star on ``ad`` or ``Ad`` elsewhere in
the package always mean the plain dual map.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import UnsupportedInputError
from .numerics import mat_exp


def cartan_matrix(series, rank):
    if series != "A":
        raise UnsupportedInputError(f"series {series!r} is not implemented (only 'A')")
    if rank < 1:
        raise UnsupportedInputError("rank must be at least 1")
    a = 2 * np.eye(rank, dtype=int)
    for i in range(rank - 1):
        a[i, i + 1] = a[i + 1, i] = -1
    return a


def _positive_roots(cart):
    """Close the simple roots under addition using root strings."""
    rank = cart.shape[0]
    simple = [tuple(int(i == j) for j in range(rank)) for i in range(rank)]
    known = set(simple)
    layer = list(simple)
    while layer:
        nxt = []
        for beta in layer:
            b = np.array(beta)
            for i in range(rank):
                # q: how far beta - k alpha_i stays a root (or zero)
                q = 0
                while True:
                    c = b.copy()
                    c[i] -= q + 1
                    if tuple(c) in known:
                        q += 1
                    else:
                        break
                p = q - int(b @ cart[:, i])
                if p > 0:
                    c = b.copy()
                    c[i] += 1
                    if tuple(c) not in known:
                        known.add(tuple(c))
                        nxt.append(tuple(c))
        layer = nxt
    return sorted(known, key=lambda v: (sum(v), tuple(-x for x in v)))


@dataclass(frozen=True)
class RootSystem:
    series: str
    rank: int
    cartan: np.ndarray
    roots: np.ndarray  # positives (height, then lex), then negatives mirrored
    pairing: tuple     # Fractions, (alpha_i, alpha_j) for simple roots

    @classmethod
    def build(cls, series, rank):
        cart = cartan_matrix(series, rank)
        pos = np.array(_positive_roots(cart), dtype=int)
        roots = np.vstack([pos, -pos])
        n = rank + 1
        pairing = tuple(tuple(Fraction(int(cart[i, j]), 2 * n) for j in range(rank))
                        for i in range(rank))
        return cls(series, rank, cart, roots, pairing)

    @property
    def n_positive(self):
        return len(self.roots) // 2

    @property
    def positive(self):
        return list(range(self.n_positive))

    @property
    def negative(self):
        return list(range(self.n_positive, len(self.roots)))

    @property
    def simple(self):
        return [self.index(tuple(int(i == j) for j in range(self.rank))) for i in range(self.rank)]

    @cached_property
    def _lookup(self):
        return {tuple(int(c) for c in r): k for k, r in enumerate(self.roots)}

    def index(self, vec):
        return self._lookup.get(tuple(int(c) for c in vec))

    def negate(self, k):
        return (k + self.n_positive) % len(self.roots)

    def pairing_matrix(self):
        return np.array([[float(x) for x in row] for row in self.pairing])

    def span(self, gamma):
        """Indices of roots in the integer span of the simple roots ``gamma``."""
        outside = [i for i in range(self.rank) if i not in set(gamma)]
        return [k for k, r in enumerate(self.roots) if not np.any(r[outside])]

    def gamma_bar_plus(self, gamma):
        inside = set(self.span(gamma))
        return [k for k in self.positive if k not in inside]

    def gamma_bar_minus(self, gamma):
        inside = set(self.span(gamma))
        return [k for k in self.negative if k not in inside]


def _elementary(n, a, b):
    m = np.zeros((n, n), dtype=np.complex128)
    m[a, b] = 1.0
    return m


@dataclass(frozen=True, eq=False)
class SimpleLieAlgebra:
    rootsystem: RootSystem
    n: int
    mats: np.ndarray = field(repr=False)      # (dim, n, n) defining-rep basis matrices
    killing: np.ndarray = field(repr=False)   # Gram matrix in the basis
    struct: np.ndarray = field(repr=False)    # struct[i, j, k]: [b_i, b_j] = sum_k struct[i,j,k] b_k

    @property
    def rank(self):
        return self.rootsystem.rank

    @property
    def dim(self):
        return self.mats.shape[0]

    @property
    def n_roots(self):
        return len(self.rootsystem.roots)

    def root_basis_index(self, k):
        """Basis position of e_α for root index k."""
        return self.rank + k

    @cached_property
    def killing_inv(self):
        return np.linalg.inv(self.killing)

    @cached_property
    def _coord_solver(self):
        # coords(M) = killing_inv @ [2n tr(b_j M)]_j
        # K(b_j, M) = 2n tr(b_j M) = 2n vec(b_j^T) . vec(M)
        pair = 2 * self.n * self.mats.transpose(0, 2, 1).reshape(self.dim, -1)
        return self.killing_inv @ pair

    def coords(self, m):
        """Basis coordinates of a traceless matrix."""
        return self._coord_solver @ np.asarray(m, dtype=np.complex128).reshape(-1)

    def matrix(self, x):
        return np.tensordot(np.asarray(x, dtype=np.complex128), self.mats, axes=1)

    # Cartan data ---------------------------------------------------------
    @cached_property
    def root_h(self):
        """Row k: the root α_k as a covector on h in the orthonormal coordinates."""
        diag = np.array([np.diag(self.mats[i]) for i in range(self.rank)])  # (r, n)
        out = np.zeros((self.n_roots, self.rank), dtype=np.complex128)
        for k in range(self.n_roots):
            ek = self.mats[self.root_basis_index(k)]
            a, b = np.argwhere(np.abs(ek) > 0)[0]
            out[k] = diag[:, a] - diag[:, b]
        return out

    def embed_h(self, z):
        """ι: h -> g."""
        out = np.zeros(self.dim, dtype=np.complex128)
        out[:self.rank] = z
        return out

    def restrict_h(self, xi):
        """ι*: g* -> h*."""
        return np.asarray(xi)[:self.rank]

    def cartan_coords(self, diag_matrix):
        d = np.diag(diag_matrix) if np.ndim(diag_matrix) == 2 else np.asarray(diag_matrix)
        return np.array([2 * self.n * np.sum(np.diag(self.mats[i]) * d) for i in range(self.rank)])

    def cartan_element(self, z):
        return np.tensordot(np.asarray(z, dtype=np.complex128), self.mats[:self.rank], axes=1)

    def h_root(self, k):
        """h_α: the Killing dual of α, as an element of g."""
        return self.embed_h(self.root_h[k])

    @cached_property
    def N(self):
        """(k, l) -> N_{α_k, α_l} for root pairs whose sum is a root."""
        out = {}
        rs = self.rootsystem
        for k in range(self.n_roots):
            for l in range(self.n_roots):
                m = rs.index(rs.roots[k] + rs.roots[l])
                if m is None:
                    continue
                out[(k, l)] = self.struct[self.root_basis_index(k), self.root_basis_index(l),
                                          self.root_basis_index(m)]
        return out

    # pointwise arithmetic -------------------------------------------------
    def bracket(self, x, y):
        return np.einsum("i,j,ijk->k", x, y, self.struct)

    def killing_form(self, x, y):
        return x @ self.killing @ y

    def sharp(self, xi):
        return self.killing_inv @ xi

    def flat(self, x):
        return self.killing @ x

    def ad(self, x):
        """Matrix of ad_x: column j holds the coordinates of [x, b_j]."""
        return np.einsum("i,ijk->kj", x, self.struct)

    def coad(self, x):
        """Coadjoint action of x on covectors: -(ad_x)^T."""
        return -self.ad(x).T

    def Ad(self, group_elem):
        g = np.asarray(group_elem, dtype=np.complex128)
        ginv = np.linalg.inv(g)
        conj = np.einsum("ab,kbc,cd->kad", g, self.mats, ginv)
        return np.array([self.coords(c) for c in conj]).T

    def coAd(self, group_elem):
        """Coadjoint action of a group element: (Ad_{X^{-1}})^T."""
        return self.Ad(np.linalg.inv(group_elem)).T

    def exp(self, x):
        return mat_exp(self.matrix(x))

    # self-checks ------------------------------------------------------------
    def jacobi_residual(self):
        c = self.struct
        t = (np.einsum("jkm,iml->ijkl", c, c) + np.einsum("kim,jml->ijkl", c, c)
             + np.einsum("ijm,kml->ijkl", c, c))
        return float(np.max(np.abs(t)))

    def antisymmetry_residual(self):
        return float(np.max(np.abs(self.struct + self.struct.transpose(1, 0, 2))))

    def killing_invariance_residual(self):
        # K([b_i,b_j], b_k) + K(b_j, [b_i,b_k])
        kc = np.einsum("ijm,mk->ijk", self.struct, self.killing)
        return float(np.max(np.abs(kc + kc.transpose(0, 2, 1))))

    def normalization_residual(self):
        """max over α of |K(e_α,e_-α) - 1| and ||[e_α,e_-α] - h_α||; plus Cartan orthonormality."""
        rs = self.rootsystem
        worst = float(np.max(np.abs(self.killing[:self.rank, :self.rank] - np.eye(self.rank))))
        for k in range(self.n_roots):
            i = self.root_basis_index(k)
            j = self.root_basis_index(rs.negate(k))
            worst = max(worst, abs(self.killing[i, j] - 1.0))
            br = self.struct[i, j]
            worst = max(worst, float(np.max(np.abs(br - self.h_root(k)))))
        return worst


def build_algebra(series, rank):
    """sl(rank+1) with Killing-orthonormal Cartan basis and K(e_α, e_-α) = 1."""
    rs = RootSystem.build(series, rank)
    n = rank + 1

    def kill(a, b):
        return 2 * n * np.trace(a @ b)

    cartan = []
    for i in range(rank):
        h = _elementary(n, i, i) - _elementary(n, i + 1, i + 1)
        for c in cartan:
            h = h - kill(c, h) * c
        cartan.append(h / np.sqrt(kill(h, h)))

    pos = []
    neg = []
    for k in rs.positive:
        r = rs.roots[k]
        nz = np.nonzero(r)[0]
        a, b = nz[0], nz[-1] + 1   # α = ε_a - ε_b for type A
        pos.append(_elementary(n, a, b))
        neg.append(_elementary(n, b, a) / (2 * n))
    mats = np.array(cartan + pos + neg)
    dim = mats.shape[0]
    killing = np.array([[kill(mats[i], mats[j]) for j in range(dim)] for i in range(dim)])
    alg = SimpleLieAlgebra(rs, n, mats, killing, np.zeros((dim, dim, dim), dtype=np.complex128))
    struct = np.zeros((dim, dim, dim), dtype=np.complex128)
    for i in range(dim):
        for j in range(dim):
            struct[i, j] = alg.coords(mats[i] @ mats[j] - mats[j] @ mats[i])
    return SimpleLieAlgebra(rs, n, mats, killing, struct)
