"""Elementwise helpers that work on float64 arrays and on object arrays of mpmath numbers.

Most of the toolkit runs in double precision.  The proof replay needs far more
digits (the lifted sequences grow like ``N**(2n)``), so the same map and solver
code is evaluated on ``dtype=object`` arrays holding ``mpmath.mpf`` values.
"""
import mpmath
import numpy as np

_mp_sin = np.frompyfunc(mpmath.sin, 1, 1)
_mp_cos = np.frompyfunc(mpmath.cos, 1, 1)
_mp_sqrt = np.frompyfunc(mpmath.sqrt, 1, 1)
_mp_log = np.frompyfunc(mpmath.log, 1, 1)
_mp_float = np.frompyfunc(float, 1, 1)


def is_mp(x):
    return isinstance(x, np.ndarray) and x.dtype == object


def to_mp(x):
    """Convert to an object array of ``mpf`` at the current working precision."""
    x = np.asarray(x)
    out = np.empty(x.shape, dtype=object)
    flat = out.reshape(-1)
    for i, xi in enumerate(x.reshape(-1)):
        flat[i] = xi if isinstance(xi, mpmath.mpf) else mpmath.mpf(
            float(xi) if isinstance(xi, np.generic) else xi)
    return out


def to_float(x):
    x = np.asarray(x)
    if x.dtype == object:
        return np.asarray(_mp_float(x), dtype=float)
    return x.astype(float, copy=False)


def like(x, values):
    """Cast ``values`` to the backend of ``x``."""
    return to_mp(values) if is_mp(x) else np.asarray(values, dtype=float)


def pi(x):
    return mpmath.pi if is_mp(x) else np.pi


def sin(x):
    return _mp_sin(x) if is_mp(x) else np.sin(x)


def cos(x):
    return _mp_cos(x) if is_mp(x) else np.cos(x)


def norm(v):
    """Euclidean norm along the last axis."""
    v = np.asarray(v)
    if v.dtype == object:
        sq = (v * v).sum(axis=-1)
        return _mp_sqrt(sq) if isinstance(sq, np.ndarray) else mpmath.sqrt(sq)
    return np.linalg.norm(v, axis=-1)


def solve(M, b):
    """Solve ``M x = b`` for a small dense system; ``b`` may be a vector or a matrix."""
    if not (is_mp(M) or is_mp(b)):
        return np.linalg.solve(M, b)
    M = mpmath.matrix(np.asarray(M, dtype=object).tolist())
    b = np.asarray(b, dtype=object)
    if b.ndim == 1:
        return np.array(list(mpmath.lu_solve(M, mpmath.matrix(b.tolist()))), dtype=object)
    cols = [list(mpmath.lu_solve(M, mpmath.matrix(b[:, j].tolist()))) for j in range(b.shape[1])]
    return np.array(cols, dtype=object).T


def eye(m, mp=False):
    return to_mp(np.eye(m)) if mp else np.eye(m)


def zeros(shape, mp=False):
    return to_mp(np.zeros(shape)) if mp else np.zeros(shape)
