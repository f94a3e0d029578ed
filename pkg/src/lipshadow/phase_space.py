"""Flat phase spaces, the exponential chart, and the built-in catalogue of maps.

Only two geometries are supported: the unit torus ``[0, 1)**m`` and a Euclidean
box.  On both the exponential map is a translation, so every distortion constant
of the chart equals one.
"""
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from . import _backend as bk
from .errors import ContractError, InjectivityError, NonInvertibleError

__all__ = [
    "PhaseSpace", "SystemDef", "Orbit", "Pseudotrajectory",
    "distance", "exp_chart", "exp_chart_inv", "wrap",
    "make_system", "orbit_of", "SYSTEMS",
]

ORBIT_TOL = 1e-12
INVERSION_TOL = 1e-13
INVERSION_MAX_ITER = 50


@dataclass(frozen=True)
class PhaseSpace:
    dimension: int
    topology: str = "torus"
    box_bounds: Optional[tuple] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ContractError("dimension must be positive")
        if self.topology not in ("torus", "box"):
            raise ContractError(f"unknown topology {self.topology!r}")
        if self.topology == "box":
            bounds = self.box_bounds
            if bounds is None:
                bounds = ((-np.inf, np.inf),) * self.dimension
            bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
            if len(bounds) != self.dimension or any(lo >= hi for lo, hi in bounds):
                raise ContractError("box_bounds must give one nonempty interval per axis")
            object.__setattr__(self, "box_bounds", bounds)
        elif self.box_bounds is not None:
            raise ContractError("box_bounds only apply to box topology")

    @property
    def injectivity_radius(self):
        return 0.5 if self.topology == "torus" else np.inf

    def check_point(self, x):
        x = np.asarray(x)
        if x.ndim == 0 and self.dimension == 1:
            x = x.reshape(1)
        if x.shape[-1:] != (self.dimension,):
            raise ContractError(
                f"expected points of dimension {self.dimension}, got shape {x.shape}")
        return x


def _min_image(delta):
    # wrap each coordinate difference into [-1/2, 1/2)
    return (delta + 0.5) % 1 - 0.5


def wrap(space, x):
    """Reduce ``x`` to the fundamental domain (identity on a box)."""
    x = space.check_point(x)
    return x % 1 if space.topology == "torus" else x


def exp_chart_inv(space, x, y):
    """Displacement ``v`` with ``exp_chart(space, x, v) == y`` and ``|v|`` minimal."""
    x = space.check_point(x)
    y = space.check_point(y)
    if space.topology == "torus":
        return _min_image(y - x)
    return y - x


def distance(space, x, y):
    return bk.norm(exp_chart_inv(space, x, y))


def exp_chart(space, x, v):
    x = space.check_point(x)
    v = space.check_point(v)
    size = bk.norm(v)
    if np.any(bk.to_float(size) >= space.injectivity_radius):
        raise InjectivityError(
            f"tangent vector of length {float(np.max(bk.to_float(size))):.3g} "
            f"exceeds injectivity radius {space.injectivity_radius}")
    return wrap(space, x + v)


@dataclass(frozen=True)
class SystemDef:
    """A diffeomorphism of a flat phase space together with its Jacobian.

    ``eval`` and ``jac`` accept float arrays or object arrays of ``mpf``.
    ``inverse_guess`` seeds the Newton inversion used for negative times.
    """
    name: str
    space: PhaseSpace
    parameters: Mapping[str, float]
    _eval: Callable = field(repr=False)
    _jac: Callable = field(repr=False)
    _inverse_guess: Callable = field(repr=False)

    def eval(self, x):
        x = self.space.check_point(x)
        return wrap(self.space, self._eval(x))

    def jac(self, x):
        x = self.space.check_point(x)
        return self._jac(x)

    def inverse(self, y):
        """Preimage of ``y`` by Newton iteration on ``eval``."""
        y = self.space.check_point(y)
        tol = INVERSION_TOL
        if bk.is_mp(y):
            import mpmath
            tol = mpmath.mpf(10) ** (-(mpmath.mp.dps - 8))
        x = wrap(self.space, self._inverse_guess(y))
        for _ in range(INVERSION_MAX_ITER):
            r = exp_chart_inv(self.space, y, self.eval(x))
            if bk.norm(r) <= tol:
                return x
            x = wrap(self.space, x - bk.solve(self.jac(x), r))
        raise NonInvertibleError(
            f"{self.name}: Newton inversion did not converge in {INVERSION_MAX_ITER} iterations")


_CAT = np.array([[2, 1], [1, 1]])
_CAT_INV = np.array([[1, -1], [-1, 2]])


def _cat_map(params):
    return (lambda x: _CAT @ x,
            lambda x: bk.like(x, _CAT),
            lambda y: _CAT_INV @ y)


def _perturbed_cat(params):
    eps = params["eps"]

    def f(x):
        tau = 2 * bk.pi(x)
        return _CAT @ x + eps * bk.sin(tau * x) / tau

    def jac(x):
        return bk.like(x, _CAT) + np.diag(eps * bk.cos(2 * bk.pi(x) * x))

    return f, jac, lambda y: _CAT_INV @ y


def _parabolic_circle(params):
    a = params["a"]

    def f(x):
        return x + a * (1 - bk.cos(2 * bk.pi(x) * x))

    def jac(x):
        tau = 2 * bk.pi(x)
        return (1 + a * tau * bk.sin(tau * x)).reshape(1, 1)

    return f, jac, lambda y: y


def _identity_circle(params):
    return (lambda x: x + 0,
            lambda x: bk.like(x, np.eye(1)),
            lambda y: y)


def _linear_box(params):
    diag = np.array([params[k] for k in sorted(params)], dtype=float)
    return (lambda x: diag * x,
            lambda x: bk.like(x, np.diag(diag)),
            lambda y: y / diag)


def _check_range(name, lo, hi):
    def check(params):
        v = params[name]
        if not lo <= v <= hi:
            raise ContractError(f"parameter {name}={v} outside safe range [{lo}, {hi}]")
    return check


def _check_diag(params):
    if not params or not all(k.startswith("d") and k[1:].isdigit() for k in params):
        raise ContractError("linear_box takes parameters d0, d1, ... (one per axis)")
    for k, v in params.items():
        if not 1e-3 <= abs(v) <= 1e3:
            raise ContractError(f"parameter {k}={v}: |value| must lie in [1e-3, 1e3]")


# name -> (dimension, topology, default parameters, range check, builder)
SYSTEMS = {
    "cat_map": (2, "torus", {}, None, _cat_map),
    "perturbed_cat": (2, "torus", {"eps": 0.02}, _check_range("eps", 0.0, 0.05), _perturbed_cat),
    # derivative 1 + 2*pi*a*sin(2*pi*x) stays positive for a < 1/(2*pi)
    "parabolic_circle": (1, "torus", {"a": 0.05}, _check_range("a", 1e-6, 0.15), _parabolic_circle),
    "identity_circle": (1, "torus", {}, None, _identity_circle),
    "linear_box": (None, "box", {"d0": 2.0}, _check_diag, _linear_box),
}


def make_system(name, params=None):
    """Build a catalogue system.

    ``params`` is a mapping of named reals; missing names take their defaults.
    For ``linear_box`` the keys ``d0, d1, ...`` give the diagonal and fix the dimension.
    """
    if name not in SYSTEMS:
        raise ContractError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}")
    dim, topology, defaults, check, build = SYSTEMS[name]
    params = dict(params or {})
    if name == "linear_box" and params:
        merged = params
    else:
        unknown = set(params) - set(defaults)
        if unknown:
            raise ContractError(f"{name} has no parameter(s) {sorted(unknown)}")
        merged = {**defaults, **params}
    merged = {k: float(v) for k, v in merged.items()}
    if check is not None:
        check(merged)
    if dim is None:
        dim = len(merged)
    f, jac, guess = build(merged)
    return SystemDef(name, PhaseSpace(dim, topology), merged, f, jac, guess)


@dataclass(frozen=True)
class Orbit:
    """True orbit ``p_k = f^k(p)`` stored for ``k_min <= k <= k_max``."""
    system: SystemDef
    k_min: int
    points: np.ndarray

    @property
    def k_max(self):
        return self.k_min + len(self.points) - 1

    def __getitem__(self, k):
        if not self.k_min <= k <= self.k_max:
            raise IndexError(f"index {k} outside [{self.k_min}, {self.k_max}]")
        return self.points[k - self.k_min]

    def max_defect(self):
        return _max_defect(self.system, self.points)


@dataclass(frozen=True)
class Pseudotrajectory:
    space: PhaseSpace
    k_min: int
    points: np.ndarray
    defect_bound: float

    @property
    def k_max(self):
        return self.k_min + len(self.points) - 1

    def __getitem__(self, k):
        if not self.k_min <= k <= self.k_max:
            raise IndexError(f"index {k} outside [{self.k_min}, {self.k_max}]")
        return self.points[k - self.k_min]

    def max_defect(self, system):
        return _max_defect(system, self.points)


def _max_defect(system, points):
    if len(points) < 2:
        return 0.0
    images = np.stack([system.eval(x) for x in points[:-1]])
    gaps = distance(system.space, points[1:], images)
    return max(gaps) if bk.is_mp(points) else float(np.max(gaps))


def orbit_of(system, p, k_min, k_max):
    """Orbit of ``p`` on ``[k_min, k_max]``; negative times use Newton inversion."""
    if not k_min <= 0 <= k_max:
        raise ContractError("window must contain 0")
    p = wrap(system.space, system.space.check_point(p))
    forward = [p]
    for _ in range(k_max):
        forward.append(system.eval(forward[-1]))
    backward = []
    x = p
    for _ in range(-k_min):
        x = system.inverse(x)
        backward.append(x)
    points = np.stack(backward[::-1] + forward)
    return Orbit(system, k_min, points)
