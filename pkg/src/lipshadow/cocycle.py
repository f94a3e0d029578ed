"""Derivative cocycles ``A_k = Df(p_k)`` and their transition operators."""
from dataclasses import dataclass

import numpy as np

from . import _backend as bk
from .errors import ContractError, IsomorphismError

__all__ = ["Cocycle", "along_orbit", "constant", "diagonal", "transition", "qr_accumulate"]

MIN_SINGULAR_VALUE = 1e-10
RAW_PRODUCT_SPAN = 60


@dataclass(frozen=True)
class Cocycle:
    """Invertible matrices ``A_k`` for ``k_min <= k < k_max``.

    ``matrices`` has shape ``(k_max - k_min, m, m)`` and may hold mpmath numbers.
    """
    matrices: np.ndarray
    k_min: int = 0

    def __post_init__(self):
        mats = np.asarray(self.matrices)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or len(mats) == 0:
            raise ContractError("matrices must have shape (K, m, m) with K >= 1")
        sv = np.linalg.svd(bk.to_float(mats), compute_uv=False)
        if sv[:, -1].min() < MIN_SINGULAR_VALUE:
            k = int(np.argmin(sv[:, -1])) + self.k_min
            raise IsomorphismError(f"A_{k} is singular (smallest singular value {sv[:, -1].min():.3g})")
        object.__setattr__(self, "matrices", mats)
        # ||A^-1|| = 1 / sigma_min
        object.__setattr__(self, "norm_bound", float(max(sv[:, 0].max(), 1 / sv[:, -1].min())))

    @property
    def k_max(self):
        return self.k_min + len(self.matrices)

    @property
    def dimension(self):
        return self.matrices.shape[1]

    def __getitem__(self, k):
        if not self.k_min <= k < self.k_max:
            raise IndexError(f"A_{k} not in cocycle range [{self.k_min}, {self.k_max})")
        return self.matrices[k - self.k_min]


def along_orbit(system, orbit):
    """Cocycle of Jacobians along ``orbit`` (one matrix per step of the window)."""
    mats = np.stack([system.jac(x) for x in orbit.points[:-1]])
    return Cocycle(mats, orbit.k_min)


def constant(A, length, k_min=0):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return Cocycle(np.repeat(A[None], length, axis=0), k_min)


def diagonal(diag, length, k_min=0):
    return constant(np.diag(np.atleast_1d(diag)), length, k_min)


def transition(c, k, l):
    """Transition operator from time ``l`` to time ``k``.

    ``A_{k-1} ... A_l`` for ``l < k``, the identity for ``l == k`` and
    ``A_k^{-1} ... A_{l-1}^{-1}`` for ``l > k``.
    """
    for idx in (k, l):
        if not c.k_min <= idx <= c.k_max:
            raise ContractError(f"index {idx} outside [{c.k_min}, {c.k_max}]")
    mp = bk.is_mp(c.matrices)
    out = bk.eye(c.dimension, mp)
    if l < k:
        for j in range(l, k):
            out = c[j] @ out
    elif l > k:
        for j in range(l - 1, k - 1, -1):
            out = bk.solve(c[j], out)
    return out


def qr_accumulate(c, k, l):
    """Factor the transition from ``l`` to ``k`` as ``Q @ R * exp(log_scale)``.

    The product is re-orthogonalised after every step and the triangular factor
    is renormalised so arbitrarily long spans neither overflow nor underflow.
    """
    if abs(k - l) > 0:
        for idx in (k, l):
            if not c.k_min <= idx <= c.k_max:
                raise ContractError(f"index {idx} outside [{c.k_min}, {c.k_max}]")
    m = c.dimension
    mats = bk.to_float(c.matrices)
    Q, R, log_scale = np.eye(m), np.eye(m), 0.0
    if l <= k:
        steps = [mats[j - c.k_min] for j in range(l, k)]
    else:
        steps = [np.linalg.inv(mats[j - c.k_min]) for j in range(l - 1, k - 1, -1)]
    for A in steps:
        Q, Rj = np.linalg.qr(A @ Q)
        R = Rj @ R
        scale = np.abs(R).max()
        R /= scale
        log_scale += np.log(scale)
    return Q, R, log_scale
