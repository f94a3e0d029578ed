"""scikit-learn style wrappers around the shadowing and dichotomy routines.

These let the toolkit sit inside ordinary sklearn workflows (``clone``,
``get_params``, pipelines of transformers) without changing the functional API.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cocycle import Cocycle
from .linear_analysis import ray_subspaces
from .phase_space import Pseudotrajectory, make_system
from .shadowing import lipschitz_estimate, shadow

__all__ = ["ShadowingRefiner", "DichotomyEstimator", "LipschitzEstimator", "check_points"]


def check_points(X, system):
    """Validate a point sequence against ``system``'s phase space; returns a float array."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=2)
    if X.shape[1] != system.space.dimension:
        raise ValueError(f"X has {X.shape[1]} features, {system.name} lives in dimension "
                         f"{system.space.dimension}")
    return X


class ShadowingRefiner(TransformerMixin, BaseEstimator):
    """Replace a pseudotrajectory by the true orbit found by Newton shadowing.

    Parameters
    ----------
    system : str
        Catalogue name, see :func:`lipshadow.phase_space.make_system`.
    params : dict, optional
        Named system parameters.
    d : float, optional
        Defect bound used to normalise ``l_empirical_``; measured from ``X`` if omitted.
    tol : float
        Newton residual tolerance.
    max_iter : int
        Newton iteration cap.
    """

    def __init__(self, system="cat_map", params=None, d=None, tol=1e-12, max_iter=50):
        self.system = system
        self.params = params
        self.d = d
        self.tol = tol
        self.max_iter = max_iter

    def _refine(self, X):
        X = check_points(X, self.system_)
        space = self.system_.space
        d = self.d
        if d is None:
            d = Pseudotrajectory(space, 0, X, 1.0).max_defect(self.system_)
        pseudo = Pseudotrajectory(space, 0, X, float(d))
        return shadow(self.system_, pseudo, tol=self.tol, max_iter=self.max_iter)

    def fit(self, X, y=None):
        self.system_ = make_system(self.system, self.params)
        orbit, self.report_ = self._refine(X)
        self.n_features_in_ = self.system_.space.dimension
        self.orbit_ = None if orbit is None else orbit.points
        self.l_empirical_ = self.report_.l_empirical
        return self

    def transform(self, X):
        """Shadowing orbit of ``X``; rows are NaN when Newton does not converge."""
        check_is_fitted(self, "system_")
        orbit, report = self._refine(X)
        if orbit is None:
            return np.full(np.shape(X), np.nan)
        return orbit.points


class DichotomyEstimator(BaseEstimator):
    """Ray subspaces and transversality defect of a cocycle.

    ``fit`` takes the matrices ``A_{-n}, ..., A_{n-1}`` as an array of shape
    ``(2n, m, m)``.
    """

    def __init__(self, n=30):
        self.n = n

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, allow_nd=True, ensure_2d=False)
        if X.ndim != 3 or X.shape[0] != 2 * self.n:
            raise ValueError(f"expected matrices of shape (2n, m, m) = ({2 * self.n}, m, m)")
        self.report_ = ray_subspaces(Cocycle(X, -self.n), self.n)
        self.b_plus_ = self.report_.b_plus
        self.b_minus_ = self.report_.b_minus
        self.transversality_defect_ = self.report_.transversality_defect
        return self


class LipschitzEstimator(BaseEstimator):
    """Empirical Lipschitz shadowing constant from random pseudotrajectories.

    ``fit`` takes starting points, one per row; ``l_max_`` is the worst constant
    over all starting points, trials and grid values, ``table_`` the per-point tables.
    """

    def __init__(self, system="cat_map", params=None, window=300,
                 d_grid=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6), trials=10, seed=0, noise="uniform"):
        self.system = system
        self.params = params
        self.window = window
        self.d_grid = d_grid
        self.trials = trials
        self.seed = seed
        self.noise = noise

    def fit(self, X, y=None):
        system = make_system(self.system, self.params)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != system.space.dimension:
            raise ValueError("starting points have the wrong dimension")
        self.table_ = [lipschitz_estimate(system, x0, self.window, self.d_grid, self.trials,
                                          self.seed + i, self.noise)
                       for i, x0 in enumerate(X)]
        self.l_max_ = float(np.nanmax([t.l_values() for t in self.table_]))
        self.d0_ = min((t.d0 for t in self.table_ if t.d0 is not None), default=None)
        return self
