"""Hot numerical kernels with a numba path and a pure-numpy fallback.

Set ``DYNPG_DISABLE_JIT=1`` before import to force the numpy path.  Both
paths are importable side by side (``numpy_impl`` / ``jit_impl``) so tests
and the benchmark can compare them directly.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional at runtime
    numba = None

JIT_DISABLED = os.environ.get("DYNPG_DISABLE_JIT", "0") not in ("", "0")
TAYLOR_DEGREE = 18


# --------------------------------------------------------------------------
# numpy reference implementations

def _expm_np(a):
    n = a.shape[0]
    norm = np.abs(a).sum(axis=0).max()
    squarings = 0
    if norm > 0.5:
        squarings = int(np.ceil(np.log2(norm / 0.5)))
    x = a / (2.0 ** squarings)
    out = np.eye(n, dtype=np.complex128)
    term = np.eye(n, dtype=np.complex128)
    for k in range(1, TAYLOR_DEGREE + 1):
        term = term @ x / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def _ldu_np(m):
    # Doolittle without pivoting; returns False in ok when a pivot is tiny.
    n = m.shape[0]
    a = m.astype(np.complex128).copy()
    lower = np.eye(n, dtype=np.complex128)
    upper = np.eye(n, dtype=np.complex128)
    diag = np.zeros(n, dtype=np.complex128)
    ok = True
    for k in range(n):
        pivot = a[k, k]
        diag[k] = pivot
        if abs(pivot) < 1e-8:
            ok = False
            break
        lower[k + 1:, k] = a[k + 1:, k] / pivot
        upper[k, k + 1:] = a[k, k + 1:] / pivot
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:]) / pivot
    return lower, diag, upper, ok


def _poly_eval_grad_np(exps, coeffs, v):
    powers = v[None, :] ** exps
    value = np.sum(coeffs * np.prod(powers, axis=1))
    safe = np.where(exps > 0, exps - 1, 0)
    dpow = exps * v[None, :] ** safe
    grad = np.empty(v.shape[0], dtype=np.complex128)
    for j in range(v.shape[0]):
        others = powers.copy()
        others[:, j] = dpow[:, j]
        grad[j] = np.sum(coeffs * np.prod(others, axis=1))
    return value, grad


# --------------------------------------------------------------------------
# loop implementations, compiled by numba when available

def _expm_loops(a):
    n = a.shape[0]
    norm = 0.0
    for j in range(n):
        s = 0.0
        for i in range(n):
            s += abs(a[i, j])
        if s > norm:
            norm = s
    squarings = 0
    if norm > 0.5:
        squarings = int(np.ceil(np.log2(norm / 0.5)))
    x = a / (2.0 ** squarings)
    out = np.eye(n, dtype=np.complex128)
    term = np.eye(n, dtype=np.complex128)
    for k in range(1, TAYLOR_DEGREE + 1):
        term = (term @ x) / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def _ldu_loops(m):
    n = m.shape[0]
    a = m.astype(np.complex128).copy()
    lower = np.eye(n, dtype=np.complex128)
    upper = np.eye(n, dtype=np.complex128)
    diag = np.zeros(n, dtype=np.complex128)
    ok = True
    for k in range(n):
        pivot = a[k, k]
        diag[k] = pivot
        if abs(pivot) < 1e-8:
            ok = False
            break
        for i in range(k + 1, n):
            lower[i, k] = a[i, k] / pivot
            upper[k, i] = a[k, i] / pivot
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i, j] -= a[i, k] * a[k, j] / pivot
    return lower, diag, upper, ok


def _poly_eval_grad_loops(exps, coeffs, v):
    m, nv = exps.shape
    value = 0j
    grad = np.zeros(nv, dtype=np.complex128)
    for t in range(m):
        mono = coeffs[t]
        for j in range(nv):
            e = exps[t, j]
            if e > 0:
                mono = mono * v[j] ** e
        value += mono
        for j in range(nv):
            e = exps[t, j]
            if e == 0:
                continue
            d = coeffs[t] * e * v[j] ** (e - 1)
            for k in range(nv):
                if k != j and exps[t, k] > 0:
                    d = d * v[k] ** exps[t, k]
            grad[j] += d
    return value, grad


numpy_impl = {
    "expm": _expm_np,
    "ldu": _ldu_np,
    "poly_eval_grad": _poly_eval_grad_np,
}

jit_impl = None
if numba is not None:
    jit_impl = {
        "expm": numba.njit(cache=False)(_expm_loops),
        "ldu": numba.njit(cache=False)(_ldu_loops),
        "poly_eval_grad": numba.njit(cache=False)(_poly_eval_grad_loops),
    }

ACTIVE = numpy_impl if (JIT_DISABLED or jit_impl is None) else jit_impl
BACKEND = "numpy" if ACTIVE is numpy_impl else "numba"


def expm(a):
    return ACTIVE["expm"](np.ascontiguousarray(a, dtype=np.complex128))


def ldu(m):
    return ACTIVE["ldu"](np.ascontiguousarray(m, dtype=np.complex128))


def poly_eval_grad(exps, coeffs, v):
    return ACTIVE["poly_eval_grad"](
        np.ascontiguousarray(exps, dtype=np.int64),
        np.ascontiguousarray(coeffs, dtype=np.complex128),
        np.ascontiguousarray(v, dtype=np.complex128),
    )
