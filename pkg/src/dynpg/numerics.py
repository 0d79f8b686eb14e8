"""Matrix functions, triangular factorizations, finite differences, sampling."""
import zlib
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BranchCutError, FactorizationError

DEFAULT_FD_STEP = 1e-5
RICHARDSON_STEP = 1e-4


def mat_exp(x):
    """Scaling-and-squaring exponential with a degree-18 Taylor core."""
    return _kernels.expm(x)


def _check_branch(x, what):
    eig = np.linalg.eigvals(x)
    bad = (eig.real <= 0) & (np.abs(eig.imag) <= 1e-12 * np.maximum(1.0, np.abs(eig)))
    if np.any(bad):
        raise BranchCutError(f"{what}: eigenvalue on the closed negative real axis")


def mat_sqrt(x, max_iter=60):
    """Principal square root by the Denman-Beavers iteration."""
    x = np.asarray(x, dtype=np.complex128)
    _check_branch(x, "mat_sqrt")
    y = x.copy()
    z = np.eye(x.shape[0], dtype=np.complex128)
    for _ in range(max_iter):
        y_next = 0.5 * (y + np.linalg.inv(z))
        z = 0.5 * (z + np.linalg.inv(y))
        done = np.max(np.abs(y_next - y)) <= 1e-15 * max(1.0, np.max(np.abs(y_next)))
        y = y_next
        if done:
            break
    return y


def mat_log(x):
    """Principal logarithm by inverse scaling and squaring.

    Square roots are taken until the argument is within 1/4 of the identity,
    then the Mercator series is summed.
    """
    x = np.asarray(x, dtype=np.complex128)
    _check_branch(x, "mat_log")
    n = x.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    roots = 0
    while np.abs(x - eye).sum(axis=0).max() > 0.25:
        x = mat_sqrt(x)
        roots += 1
        if roots > 60:
            raise BranchCutError("mat_log: square-root sequence failed to converge")
    y = x - eye
    out = np.zeros_like(y)
    term = eye
    for k in range(1, 60):
        term = term @ y
        out = out + ((-1) ** (k + 1) / k) * term
    return out * (2.0 ** roots)


def ldu(m):
    """M = L D U with L unit lower, D diagonal (vector), U unit upper."""
    lower, diag, upper, ok = _kernels.ldu(m)
    if not ok:
        raise FactorizationError("ldu: leading principal minor below 1e-8")
    return lower, diag, upper


def birkhoff(m):
    """M = U0 D L0 with U0 unit upper, D diagonal (vector), L0 unit lower."""
    m = np.asarray(m, dtype=np.complex128)
    j = np.eye(m.shape[0])[::-1]
    lower, diag, upper = ldu(j @ m @ j)
    return j @ lower @ j, diag[::-1].copy(), j @ upper @ j


# --------------------------------------------------------------------------
# finite differences

@dataclass(frozen=True)
class FDResult:
    value: np.ndarray
    disagreement: float
    used_richardson: bool


def central(curve, step=DEFAULT_FD_STEP):
    """Central difference of a curve t -> array at t = 0."""
    return (np.asarray(curve(step)) - np.asarray(curve(-step))) / (2.0 * step)


def richardson(curve, step=RICHARDSON_STEP):
    return (4.0 * central(curve, step / 2.0) - central(curve, step)) / 3.0


def curve_derivative(curve, step=DEFAULT_FD_STEP, fallback=True):
    """Central difference with a Richardson fallback.

    The Richardson estimate at ``RICHARDSON_STEP`` replaces the plain central
    difference when the two disagree by more than ten times the roundoff floor
    of the plain estimate.
    """
    fine = central(curve, step)
    if not fallback:
        return FDResult(np.asarray(fine), 0.0, False)
    coarse = richardson(curve, RICHARDSON_STEP)
    gap = float(np.max(np.abs(np.asarray(fine) - np.asarray(coarse)))) if np.size(fine) else 0.0
    scale = max(1.0, float(np.max(np.abs(coarse))) if np.size(coarse) else 1.0)
    floor = 1e-16 * scale / step
    if gap > 10.0 * max(floor, 1e-10 * scale):
        return FDResult(np.asarray(coarse), gap, True)
    return FDResult(np.asarray(fine), gap, False)


def fd_derivative(f, point, direction, step=DEFAULT_FD_STEP, use_richardson=False):
    """Directional derivative of f at point along direction."""
    point = np.asarray(point)
    direction = np.asarray(direction)

    def curve(t):
        return f(point + t * direction)

    if use_richardson:
        return curve_derivative(curve, step)
    fine = central(curve, step)
    other = central(curve, 2.0 * step)
    gap = float(np.max(np.abs(np.asarray(fine) - np.asarray(other)))) if np.size(fine) else 0.0
    return FDResult(np.asarray(fine), gap, False)


# --------------------------------------------------------------------------
# seeded sampling

def sample_rng(seed, *keys):
    """Independent generator for one (suite, sample) slot.

    String keys are hashed with crc32 so the stream does not depend on the
    Python hash seed.
    """
    spawn = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn))


def small_vector(rng, dim, max_norm=0.5, complex_=False):
    """Gaussian direction scaled to a norm in [0.2, 1] * max_norm."""
    v = rng.standard_normal(dim)
    if complex_:
        v = v + 1j * rng.standard_normal(dim)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        return v
    return v * (max_norm * rng.uniform(0.2, 1.0) / nrm)
