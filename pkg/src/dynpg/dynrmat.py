"""Dynamical r-matrices of Etingof-Varchenko type and their defining equations.

An r-matrix R(q) is stored as a (dim, dim) matrix sending covector
coordinates to vector coordinates: ``(R @ B)`` is R(q)B and ``A @ R @ B`` is
⟨A, R(q)B⟩.  Its Cartan block is a closed two-form C(q), and its root part
sends the covector dual to e_{-α} to φ_α(q) e_α.
"""
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import CalibrationError, SingularPointError
from .liealg import SimpleLieAlgebra
from .numerics import sample_rng, small_vector
from .residual import Residual, magnitude, serialize_point

SINGULAR_GUARD = 1e-3


@dataclass(frozen=True, eq=False)
class TwoForm:
    """C_ij(q) = const_ij + sum_k linear_ijk q_k, antisymmetric in (i, j)."""

    const: np.ndarray
    linear: np.ndarray

    @classmethod
    def zero(cls, rank):
        return cls(np.zeros((rank, rank), dtype=np.complex128),
                   np.zeros((rank, rank, rank), dtype=np.complex128))

    @classmethod
    def constant(cls, c):
        c = np.asarray(c, dtype=np.complex128)
        return cls(c, np.zeros(c.shape + (c.shape[0],), dtype=np.complex128))

    @classmethod
    def random_closed(cls, rank, rng, linear=False, scale=0.3):
        a = rng.standard_normal((rank, rank)) * scale
        const = a - a.T
        lin = np.zeros((rank, rank, rank))
        if linear:
            # C = d(a) with a_j(q) = 1/2 q^T S_j q gives linear_ijl = S_j[i,l] - S_i[j,l]
            s = rng.standard_normal((rank, rank, rank)) * scale
            s = s + s.transpose(0, 2, 1)
            lin = np.einsum("jil->ijl", s) - np.einsum("ijl->ijl", s)
        return cls(const.astype(np.complex128), lin.astype(np.complex128))

    def __call__(self, q):
        return self.const + self.linear @ np.asarray(q)

    def derivative(self, lam):
        return self.linear @ np.asarray(lam)

    def closedness_residual(self):
        l = self.linear
        return magnitude(l + l.transpose(1, 2, 0) + l.transpose(2, 0, 1))

    def antisymmetry_residual(self, q):
        c = self(q)
        return magnitude(c + c.T)


class RMatrix:
    """Interface shared by dynamical and constant r-matrices."""

    algebra: SimpleLieAlgebra
    chi_scale: complex

    def R(self, q):
        raise NotImplementedError

    def dR(self, q, lam):
        raise NotImplementedError

    def check_regular(self, q):
        return None


@dataclass(frozen=True, eq=False)
class DynamicalR(RMatrix):
    algebra: SimpleLieAlgebra
    gamma: tuple = ()
    mu: np.ndarray = None
    twoform: TwoForm = None
    chi_scale: complex = 0.25

    def __post_init__(self):
        r = self.algebra.rank
        if self.mu is None:
            object.__setattr__(self, "mu", np.zeros(r, dtype=np.complex128))
        if self.twoform is None:
            object.__setattr__(self, "twoform", TwoForm.zero(r))
        object.__setattr__(self, "gamma", tuple(sorted(self.gamma)))

    # root bookkeeping; cached because φ evaluation sits inside every FD loop
    @cached_property
    def span(self):
        return self.algebra.rootsystem.span(self.gamma)

    @cached_property
    def bar_plus(self):
        return self.algebra.rootsystem.gamma_bar_plus(self.gamma)

    @cached_property
    def bar_minus(self):
        return self.algebra.rootsystem.gamma_bar_minus(self.gamma)

    def root_arguments(self, q):
        """(α, q - μ) for every root α."""
        return self.algebra.root_h @ (np.asarray(q) - self.mu)

    def check_regular(self, q):
        x = self.root_arguments(q)[self.span]
        if x.size and np.min(np.abs(x)) < SINGULAR_GUARD:
            raise SingularPointError(f"|(α, q-μ)| = {np.min(np.abs(x)):.3e} below {SINGULAR_GUARD}")

    def phis(self, q):
        self.check_regular(q)
        out = np.empty(self.algebra.n_roots, dtype=np.complex128)
        out[self.bar_plus] = 0.5
        out[self.bar_minus] = -0.5
        span = self.span
        if span:
            x = self.root_arguments(q)[span]
            out[span] = 0.5 / np.tanh(x / 2.0)
        return out

    def dphis(self, q, lam):
        """Directional derivative of every φ_α along λ ∈ h*."""
        ph = self.phis(q)
        out = np.zeros(self.algebra.n_roots, dtype=np.complex128)
        span = self.span
        if span:
            out[span] = (0.25 - ph[span] ** 2) * (self.algebra.root_h[span] @ np.asarray(lam))
        return out

    def _assemble(self, cartan_block, root_values):
        g = self.algebra
        rs = g.rootsystem
        out = np.zeros((g.dim, g.dim), dtype=np.complex128)
        out[:g.rank, :g.rank] = cartan_block
        for k in range(g.n_roots):
            out[g.root_basis_index(k), g.root_basis_index(rs.negate(k))] = root_values[k]
        return out

    def R(self, q):
        return self._assemble(self.twoform(q), self.phis(q))

    def dR(self, q, lam):
        return self._assemble(self.twoform.derivative(lam), self.dphis(q, lam))

    def C_sharp(self, q):
        return self.twoform(q)


@dataclass(frozen=True, eq=False)
class ConstantR(RMatrix):
    algebra: SimpleLieAlgebra
    operator: np.ndarray
    chi_scale: complex = 0.25
    label: str = "constant"

    def R(self, q=None):
        return self.operator

    def dR(self, q, lam):
        return np.zeros_like(self.operator)


def standard_r(algebra, chi_scale=0.25):
    """R = (Π_{n+} - Π_{n-}) / 2 in the Killing identification."""
    op = DynamicalR(algebra, ()).R(np.zeros(algebra.rank))
    return ConstantR(algebra, op, chi_scale, "standard")


def zero_r(algebra):
    return ConstantR(algebra, np.zeros((algebra.dim, algebra.dim), dtype=np.complex128), 0.0, "zero")


@dataclass(frozen=True, eq=False)
class PerturbedR(RMatrix):
    """base.R(q) + eps * S for a fixed matrix S; a negative control."""

    base: RMatrix
    perturbation: np.ndarray
    chi_scale: complex = None

    def __post_init__(self):
        if self.chi_scale is None:
            object.__setattr__(self, "chi_scale", self.base.chi_scale)

    @property
    def algebra(self):
        return self.base.algebra

    def R(self, q):
        return self.base.R(q) + self.perturbation

    def dR(self, q, lam):
        return self.base.dR(q, lam)

    def check_regular(self, q):
        return self.base.check_regular(q)


def perturb(r, eps, rng, kind="generic"):
    """Perturb an r-matrix by eps times a random matrix.

    kind='generic' breaks skew-symmetry, equivariance and the Yang-Baxter
    equation at once; kind='skew' keeps skew-symmetry but breaks equivariance.
    """
    dim = r.algebra.dim
    s = rng.standard_normal((dim, dim))
    if kind == "skew":
        s = s - s.T
    s = s / np.max(np.abs(s))
    return PerturbedR(r, eps * s.astype(np.complex128))


# --------------------------------------------------------------------------
# defining equations

def skew_residual(r, q):
    m = r.R(q)
    return Residual("skew", magnitude(m + m.T), 1e-8, serialize_point(q=q))


def equivariance_residual(r, q, z, tol=1e-8):
    """dR(q)(ad*_Z q) + R(q) ad*_{ιZ} + ad_{ιZ} R(q), with ad* the dual map."""
    g = r.algebra
    iz = g.embed_h(z)
    ad = g.ad(iz)
    # ad*_Z q on h*: q ∘ ad_Z restricted to h
    adq = (ad[:g.rank, :g.rank]).T @ np.asarray(q)
    m = r.dR(q, adq) + r.R(q) @ ad.T + ad @ r.R(q)
    return Residual("equivariance", magnitude(m), tol, serialize_point(q=q, z=z))


def cdybe_lhs(r, q, a, b):
    """Left-hand side of the dynamical Yang-Baxter equation, a vector in g."""
    g = r.algebra
    R = r.R(q)
    ra, rb = R @ a, R @ b
    out = r.dR(q, g.restrict_h(a)) @ b - r.dR(q, g.restrict_h(b)) @ a
    grad = np.array([b @ r.dR(q, np.eye(g.rank)[k]) @ a for k in range(g.rank)])
    out = out + g.embed_h(grad)
    out = out - g.bracket(ra, rb)
    out = out - R @ (g.ad(ra).T @ b) + R @ (g.ad(rb).T @ a)
    return out


def chi_rhs(r, a, b, scale=None):
    g = r.algebra
    c = r.chi_scale if scale is None else scale
    return c * g.bracket(g.sharp(a), g.sharp(b))


def cdybe_residual(r, q, a, b, tol=1e-8):
    val = magnitude(cdybe_lhs(r, q, a, b) - chi_rhs(r, a, b))
    return Residual("cdybe", val, tol, serialize_point(q=q))


def chi_oracle(algebra, samples=12, seed=0, tol=1e-10):
    """Least-squares scalar c with LHS(A,B) = c [A#, B#] on the triangular solution.

    Pairs with [A#, B#] = 0 carry no information and are skipped.
    """
    r = DynamicalR(algebra, ())
    lhs, rhs = [], []
    for i in range(samples):
        rng = sample_rng(seed, "chi_oracle", algebra.rank, i)
        q = small_vector(rng, algebra.rank)
        a = small_vector(rng, algebra.dim, complex_=True)
        b = small_vector(rng, algebra.dim, complex_=True)
        v = algebra.bracket(algebra.sharp(a), algebra.sharp(b))
        if magnitude(v) < 1e-12:
            continue
        lhs.append(cdybe_lhs(r, q, a, b))
        rhs.append(v)
    lhs = np.concatenate(lhs)
    rhs = np.concatenate(rhs)
    c = np.vdot(rhs, lhs) / np.vdot(rhs, rhs)
    fit = magnitude(lhs - c * rhs)
    if fit > tol:
        raise CalibrationError(f"chi_oracle: fit residual {fit:.3e} exceeds {tol:.1e}")
    if abs(c.imag) < 1e-14:
        c = complex(c.real, 0.0)
    return complex(c)


def with_chi(r, c):
    return replace(r, chi_scale=c)


def regular_point(r, rng, max_tries=100, max_norm=0.5):
    """Sample q (norm <= max_norm) away from every singular hyperplane."""
    for _ in range(max_tries):
        q = small_vector(rng, r.algebra.rank, max_norm)
        try:
            r.check_regular(q)
            return q
        except SingularPointError:
            continue
    raise SingularPointError("no regular point found")
