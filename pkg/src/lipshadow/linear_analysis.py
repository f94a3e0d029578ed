"""Bounded solutions of ``v_{k+1} = A_k v_k + w_k``, ray dichotomies and the Mane test.

The bounded solution on a finite window is the minimiser of ``sum_k |v_k|**2``
subject to the recursion, with both endpoints free.  The constraint matrix is
block bidiagonal, so the minimal-norm solution ``B^T (B B^T)^{-1} w`` needs one
block-tridiagonal SPD solve, done here by block elimination.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _backend as bk
from ._rng import stream, uniform_ball
from .cocycle import along_orbit, qr_accumulate
from .errors import ContractError
from .phase_space import orbit_of

__all__ = [
    "BoundedSolveResult", "DichotomyReport",
    "solve_bounded", "gain_estimate", "ray_subspaces", "mane_test",
    "GAP_THRESHOLD",
]

GAP_THRESHOLD = 10.0


@dataclass(frozen=True)
class BoundedSolveResult:
    v: np.ndarray
    sup_norm: float
    residual: float
    gain: float
    k_min: int = 0


def _apply(mats, v):
    if bk.is_mp(mats) or bk.is_mp(v):
        return np.stack([A @ x for A, x in zip(mats, v)])
    return np.einsum("kij,kj->ki", mats, v)


def _apply_t(mats, v):
    if bk.is_mp(mats) or bk.is_mp(v):
        return np.stack([A.T @ x for A, x in zip(mats, v)])
    return np.einsum("kji,kj->ki", mats, v)


def recursion_residual(mats, v, w):
    """Largest ``|v_{k+1} - A_k v_k - w_k|`` over the window."""
    r = bk.norm(v[1:] - _apply(mats, v[:-1]) - w)
    return max(r) if bk.is_mp(r) else float(np.max(r))


def _min_norm(mats, w):
    K, m = w.shape
    mp = bk.is_mp(mats) or bk.is_mp(w)
    I = bk.eye(m, mp)
    P = [None] * K  # inverses of the Schur complements, all <= I
    y = [None] * K
    P_prev = bk.zeros((m, m), mp)
    y_prev = bk.zeros(m, mp)
    for k in range(K):
        A = mats[k]
        S = I + A @ (I - P_prev) @ A.T
        P[k] = bk.solve(S, I)
        y[k] = w[k] + A @ (P_prev @ y_prev)
        P_prev, y_prev = P[k], y[k]
    lam = [None] * K
    lam[K - 1] = P[K - 1] @ y[K - 1]
    for k in range(K - 2, -1, -1):
        lam[k] = P[k] @ (y[k] + mats[k + 1].T @ lam[k + 1])
    lam = np.stack(lam)
    v = bk.zeros((K + 1, m), mp)
    v[:-1] -= _apply_t(mats, lam)
    v[1:] += lam
    return v


def solve_bounded(c, w):
    """Minimal-norm solution of ``v_{k+1} = A_k v_k + w_k`` over the cocycle window."""
    mats = c.matrices
    mp = bk.is_mp(mats)
    w = bk.to_mp(w) if mp and not bk.is_mp(w) else np.asarray(w)
    if not mp:
        w = w.astype(float)
    if w.ndim == 1 and c.dimension == 1:
        w = w.reshape(-1, 1)
    if w.shape != (len(mats), c.dimension):
        raise ContractError(f"w must have shape {(len(mats), c.dimension)}, got {w.shape}")
    if len(mats) < 2:
        raise ContractError("window must span at least 2 steps")
    if not np.all(np.isfinite(bk.to_float(w))):
        raise ContractError("w must be finite")
    v = _min_norm(mats, w)
    if not mp:
        # one step of iterative refinement
        r = w - (v[1:] - _apply(mats, v[:-1]))
        v = v + _min_norm(mats, r)
    sup = bk.norm(v).max()
    w_sup = bk.norm(w).max()
    gain = sup / w_sup if w_sup > 0 else 0 * sup
    if not mp:
        sup, gain = float(sup), float(gain)
    return BoundedSolveResult(v, sup, recursion_residual(mats, v, w), gain, c.k_min)


def gain_estimate(c, trials, seed):
    """Largest ``sup|v| / sup|w|`` over random inhomogeneities.

    Trial 0 uses a constant sequence ``w_k = u`` with a random unit ``u``, the
    slowest forcing a neutral direction can face.  The other trials draw
    ``w_k`` uniformly in the unit ball and rescale so that ``max_k |w_k| = 1``.
    """
    if trials < 1:
        raise ContractError("trials must be >= 1")
    K, m = len(c.matrices), c.dimension
    gains = []
    for trial in range(trials):
        rng = stream(seed, trial)
        if trial == 0:
            u = uniform_ball(rng, 1, m)[0]
            w = np.tile(u / np.linalg.norm(u), (K, 1))
        else:
            w = uniform_ball(rng, K, m)
            w /= np.linalg.norm(w, axis=1).max()
        gains.append(solve_bounded(c, w).gain)
    return max(gains)


@dataclass(frozen=True)
class DichotomyReport:
    """Estimated ``B+`` and ``B-`` at time 0 and the transversality defect.

    ``sv_gap_*`` is the ratio of the singular values straddling 1 (with 1 itself
    standing in for an empty side); a ray whose gap is below ``GAP_THRESHOLD``
    is flagged degenerate and gets an empty basis.
    """
    b_plus: np.ndarray
    b_minus: np.ndarray
    sv_gap_plus: float
    sv_gap_minus: float
    degenerate_plus: bool
    degenerate_minus: bool
    rates: dict = field(default_factory=dict)
    transversality_defect: float = 0.0
    log_singular_values: dict = field(default_factory=dict)

    @property
    def degenerate(self):
        return self.degenerate_plus or self.degenerate_minus

    @property
    def transversal(self):
        return self.transversality_defect > 0


def _log_singular_values(R, log_scale):
    """Log singular values of ``R * exp(log_scale)`` (descending) and right singular vectors.

    Small singular values of a graded triangular factor are lost by a direct SVD;
    they are recovered as reciprocals of the large singular values of ``R^-1``.
    """
    m = R.shape[0]
    _, s, Vt = np.linalg.svd(R)
    Rinv = solve_triangular(R, np.eye(m))
    s_inv = np.linalg.svd(Rinv, compute_uv=False)
    logs = np.log(np.maximum(s, np.finfo(float).tiny))
    from_inverse = -np.log(s_inv[::-1])
    accurate = s > 1e-6 * s[0]
    logs = np.where(accurate, logs, from_inverse) + log_scale
    return logs, Vt


def _split(c, n, direction):
    Q, R, log_scale = qr_accumulate(c, direction * n, 0)
    logs, Vt = _log_singular_values(R, log_scale)
    below = logs < 0
    lo = logs[below].max() if below.any() else 0.0
    hi = logs[~below].min() if (~below).any() else 0.0
    gap = float(np.exp(min(hi - lo, 700.0)))
    if gap < GAP_THRESHOLD:
        return np.zeros((c.dimension, 0)), gap, True, np.zeros(0), logs
    basis = Vt[below].T
    return basis, gap, False, logs[below] / n, logs


def _defect(b_plus, b_minus):
    M = np.hstack([b_plus, b_minus])
    m = M.shape[0]
    if M.shape[1] < m:
        return 0.0
    s = np.linalg.svd(M, compute_uv=False)
    return float(min(s[m - 1], 1.0))


def ray_subspaces(c, n):
    """Estimate ``B+`` from the transition ``0 -> n`` and ``B-`` from ``0 -> -n``.

    The retained directions are the right singular vectors whose singular values
    lie below 1, provided they are separated from the rest by a gap of at least
    ``GAP_THRESHOLD``.  Rates are ``log(sigma) / n`` for retained directions.
    """
    if n < 5:
        raise ContractError("n must be at least 5")
    if c.k_min > -n or c.k_max < n:
        raise ContractError(f"cocycle window [{c.k_min}, {c.k_max}] does not contain [-{n}, {n}]")
    bp, gp, dp, rp, lp = _split(c, n, +1)
    bm, gm, dm, rm, lm = _split(c, n, -1)
    return DichotomyReport(
        b_plus=bp, b_minus=bm, sv_gap_plus=gp, sv_gap_minus=gm,
        degenerate_plus=dp, degenerate_minus=dm,
        rates={"plus": rp, "minus": rm},
        transversality_defect=_defect(bp, bm),
        log_singular_values={"plus": lp, "minus": lm},
    )


def mane_test(system, p, n):
    """Transversality of ``B+(p)`` and ``B-(p)`` along the orbit of ``p``."""
    orbit = orbit_of(system, p, -n, n)
    return ray_subspaces(along_orbit(system, orbit), n)
