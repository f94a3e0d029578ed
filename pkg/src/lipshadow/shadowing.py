"""Pseudotrajectories, Newton shadowing, Lipschitz constants and the lifted-sequence replay.

Shadowing orbits are found by Newton's method on the orbit map
``G(y)_k = f(y_k) - y_{k+1}`` (computed in the flat chart), taking at each step
the minimal-norm correction from :func:`~lipshadow.linear_analysis.solve_bounded`.
A converged orbit is a witness: its distance to the pseudotrajectory bounds the
optimal shadowing constant from above.
"""
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from . import _backend as bk
from ._rng import stream, uniform_ball
from .cocycle import Cocycle, along_orbit
from .errors import ContractError, SmallnessError
from .linear_analysis import recursion_residual, solve_bounded
from .phase_space import (Orbit, Pseudotrajectory, distance, exp_chart, exp_chart_inv,
                          orbit_of, wrap)

__all__ = [
    "ShadowingReport", "LemmaReplayReport", "Check", "LipschitzRow", "LipschitzTable",
    "WPattern", "LimitReport",
    "random_pseudotrajectory", "lemma2_pseudotrajectory", "shadow",
    "lipschitz_estimate", "replay_lemma2", "extract_limit",
]

SHADOW_TOL = 1e-12
SHADOW_MAX_ITER = 50
REPLAY_MARGIN = 20
AUTO_MAX_HALVINGS = 40
LIMIT_RESIDUAL_TOL = 1e-8
NOISE_KINDS = ("uniform", "upstream")
UPSTREAM_SHARE = 0.75


@dataclass(frozen=True)
class ShadowingReport:
    d: float
    sup_dist: float
    l_empirical: float
    newton_iters: int
    converged: bool
    residual: float


def _images(system, points):
    return np.stack([system.eval(x) for x in points])


def _max(values):
    return max(values) if bk.is_mp(values) else float(np.max(values))


def random_pseudotrajectory(system, x0, d, k_min, k_max, seed, noise="uniform"):
    """d-pseudotrajectory starting from ``x0`` at time ``k_min``.

    ``noise="uniform"`` draws every kick uniformly from the radius-``d`` ball.
    ``noise="upstream"`` spends three quarters of the budget pushing against the
    local displacement ``f(x) - x`` and draws the last quarter uniformly, so trials
    still differ.  Next to a
    neutral fixed point this walks the pseudotrajectory steadily against the
    flow, which no true orbit can follow.
    """
    space = system.space
    if not 0 <= d < space.injectivity_radius:
        raise ContractError(f"d={d} must lie in [0, {space.injectivity_radius})")
    if k_max <= k_min:
        raise ContractError("empty window")
    if noise not in NOISE_KINDS:
        raise ContractError(f"noise must be one of {NOISE_KINDS}")
    steps = k_max - k_min
    rng = stream(seed)
    m = space.dimension
    if noise == "uniform":
        kicks = uniform_ball(rng, steps, m, d)
    else:
        kicks = uniform_ball(rng, steps, m, d * (1 - UPSTREAM_SHARE))
    points = np.empty((steps + 1, m))
    points[0] = wrap(space, space.check_point(np.asarray(x0, dtype=float)))
    for i in range(steps):
        fx = system.eval(points[i])
        eta = kicks[i]
        if noise == "upstream":
            back = exp_chart_inv(space, fx, points[i])
            size = np.linalg.norm(back)
            if size > 0:
                eta = eta + back * (d * UPSTREAM_SHARE / size)
        points[i + 1] = exp_chart(space, fx, eta) if d > 0 else fx
    return Pseudotrajectory(space, k_min, points, float(d))


def shadow(system, pseudo, tol=SHADOW_TOL, max_iter=SHADOW_MAX_ITER):
    """Refine ``pseudo`` to a true orbit by minimal-norm Newton steps.

    Returns ``(orbit, report)``; ``orbit`` is ``None`` when Newton fails, which
    is reported rather than raised.
    """
    space = system.space
    x = pseudo.points
    mp = bk.is_mp(x)
    y = x.copy()
    radius = space.injectivity_radius
    residual = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        G = exp_chart_inv(space, y[1:], _images(system, y[:-1]))
        residual = _max(bk.norm(G))
        if not math.isfinite(float(residual)):
            break
        if residual <= tol:
            converged = True
            break
        jac = np.stack([system.jac(p) for p in y[:-1]])
        try:
            step = solve_bounded(Cocycle(jac, pseudo.k_min), G).v
        except ContractError:
            break
        size = _max(bk.norm(step))
        if not float(size) < radius:
            break
        y = wrap(space, y + step)
    d = pseudo.defect_bound
    sup = _max(distance(space, y, x))
    report = ShadowingReport(
        d=float(d), sup_dist=float(sup),
        l_empirical=float(sup / d) if d > 0 else 0.0,
        newton_iters=it, converged=converged,
        residual=float(residual) if residual is not None else math.inf,
    )
    orbit = Orbit(system, pseudo.k_min, y) if converged else None
    return orbit, report


@dataclass(frozen=True)
class LipschitzRow:
    d: float
    l_max: float
    convergence_rate: float
    trials: tuple  # ShadowingReport per trial
    seconds: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class LipschitzTable:
    rows: tuple
    window: int
    noise: str

    @property
    def d0(self):
        """Largest ``d`` in the grid for which every trial converged (``None`` if none)."""
        ok = [r.d for r in self.rows if r.convergence_rate == 1.0]
        return max(ok) if ok else None

    def l_values(self):
        return np.array([r.l_max for r in self.rows])


def lipschitz_estimate(system, x0, window, d_grid, trials, seed, noise="uniform"):
    """Worst empirical shadowing constant per defect size.

    Trial ``j`` of row ``i`` uses the random stream ``(seed, i, j)``.
    """
    d_grid = [float(d) for d in d_grid]
    if not d_grid or min(d_grid) <= 0 or any(a < b for a, b in zip(d_grid, d_grid[1:])):
        raise ContractError("d_grid must be positive and descending")
    rows = []
    for i, d in enumerate(d_grid):
        start = time.perf_counter()
        reports = []
        for j in range(trials):
            pseudo = random_pseudotrajectory(system, x0, d, 0, window, _row_seed(seed, i, j), noise)
            _, rep = shadow(system, pseudo)
            reports.append(rep)
        ok = [r for r in reports if r.converged]
        l_max = max((r.l_empirical for r in ok), default=math.nan)
        rows.append(LipschitzRow(d, l_max, len(ok) / trials, tuple(reports),
                                 time.perf_counter() - start))
    return LipschitzTable(tuple(rows), window, noise)


def _row_seed(seed, row, trial):
    # one integer per (seed, row, trial) so random_pseudotrajectory keeps a single-seed API
    ss = np.random.SeedSequence([int(seed), row, trial])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# --- lifted-sequence replay --------------------------------------------------------

def _delta(mats, w):
    """Lifted sequence: ``Delta_{-n} = 0`` and ``Delta_{k+1} = A_k Delta_k + w_k``."""
    out = [w[0] * 0]
    for A, wk in zip(mats, w):
        out.append(A @ out[-1] + wk)
    return np.stack(out)


def _as_w(w, n, m, mp):
    w = np.asarray(w, dtype=object if mp else float)
    if w.ndim == 1 and m == 1:
        w = w.reshape(-1, 1)
    if w.shape != (2 * n + 1, m):
        raise ContractError(f"w must have shape {(2 * n + 1, m)} (indices -n..n)")
    sizes = bk.to_float(bk.norm(w))
    if np.any(sizes >= 1):
        raise ContractError("the lemma needs |w_k| < 1")
    return bk.to_mp(w) if mp else w


def lemma2_pseudotrajectory(system, orbit, w, d, n):
    """The pseudotrajectory ``xi`` built from the lifted sequence ``Delta``.

    ``xi_k = exp_{p_k}(d Delta_k)`` on ``[-n, n+1]``, continued outside by exact
    iteration of ``f`` from the two ends.  Returns ``(pseudo, delta)`` where
    ``pseudo`` covers the orbit's window with defect bound ``4d`` and ``delta`` is
    indexed from ``-n``.  Raises :class:`SmallnessError` if ``d`` is too large.
    """
    space = system.space
    if orbit.k_min > -n or orbit.k_max < n + 1:
        raise ContractError(f"orbit must cover [-{n}, {n + 1}]")
    mp = bk.is_mp(orbit.points)
    w = _as_w(w, n, space.dimension, mp)
    mats = np.stack([system.jac(orbit[k]) for k in range(-n, n + 1)])
    delta = _delta(mats, w)
    Q = float(_max(bk.norm(delta)))
    radius = space.injectivity_radius
    if d * Q >= radius:
        raise SmallnessError(f"d={d:.3g} too large: need d*Q < {radius} with Q={Q:.3g}",
                             d_max=radius / Q)
    d_ = mpmath.mpf(d) if mp else d
    inner = np.stack([exp_chart(space, orbit[k], d_ * delta[k + n]) for k in range(-n, n + 2)])
    before = [inner[0]]
    for _ in range(-n - orbit.k_min):
        before.append(system.inverse(before[-1]))
    after = [inner[-1]]
    for _ in range(orbit.k_max - n - 1):
        after.append(system.eval(after[-1]))
    parts = [np.stack(before[:0:-1])] if len(before) > 1 else []
    parts.append(inner)
    if len(after) > 1:
        parts.append(np.stack(after[1:]))
    points = np.concatenate(parts)
    pseudo = Pseudotrajectory(space, orbit.k_min, points, 4 * float(d))
    measured = float(pseudo.max_defect(system))
    if measured > 4 * d:
        raise SmallnessError(f"pseudotrajectory defect {measured:.3g} exceeds 4d", d_max=d / 2)
    return pseudo, delta


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    passed: bool


@dataclass
class LemmaReplayReport:
    """Every sequence of the replay, as floats; ``z`` lives on the full window.

    ``delta``, ``t`` and ``b`` are indexed from ``-n``; ``xi``, ``y`` and ``z``
    from ``k_min = -n - margin``.
    """
    n: int
    d: float
    L: float
    Q: float
    mu1: float
    delta: np.ndarray
    xi: np.ndarray
    y: Optional[np.ndarray]
    t: Optional[np.ndarray]
    b: Optional[np.ndarray]
    z: Optional[np.ndarray]
    k_min: int
    checks: list = field(default_factory=list)
    shadow: Optional[ShadowingReport] = None
    margin_dist: float = math.nan
    halvings: int = 0
    digits: int = 0
    message: str = ""

    @property
    def passed(self):
        return bool(self.checks) and all(c.passed for c in self.checks)

    def check(self, name):
        return next(c for c in self.checks if c.name == name)


CHECK_NAMES = ("defect<=4d", "(2.5)", "(Add7.1.1)", "(tk)", "(mu1)", "(fly1)", "(1.4)", "(1.5)")


def _mu1(N, n):
    # any mu1 with (sum_{j=0}^{2n} (N+1)^j) * mu1 < 1 will do; take half the limit
    total = sum(mpmath.mpf(N + 1) ** j for j in range(2 * n + 1))
    return 1 / (2 * total)


def _digits(d, Q):
    return 30 + math.ceil(-math.log10(d)) + 2 * math.ceil(math.log10(max(Q, 10.0)))


def _replay_once(system, p, w, n, L, d, margin):
    """One pass of the proof pipeline at a fixed ``d``; returns a report."""
    m = system.space.dimension
    orbit = orbit_of(system, bk.to_mp(np.asarray(p, dtype=float)), -n - margin, n + 1 + margin)
    cocycle = along_orbit(system, orbit)
    N = cocycle.norm_bound
    mats = np.stack([cocycle[k] for k in range(-n, n + 1)])
    w = _as_w(w, n, m, True)
    delta = _delta(mats, w)
    Q = _max(bk.norm(delta))
    mu1 = _mu1(N, n)
    base = dict(n=n, d=float(d), L=float(L), Q=float(Q), mu1=float(mu1),
                delta=bk.to_float(delta), k_min=orbit.k_min)
    d_ = mpmath.mpf(d)
    try:
        pseudo, _ = lemma2_pseudotrajectory(system, orbit, w, d, n)
    except SmallnessError as exc:
        return LemmaReplayReport(xi=np.empty((0, m)), y=None, t=None, b=None, z=None,
                                 checks=[Check("defect<=4d", math.inf, 4 * float(d), False)],
                                 message=str(exc), **base)
    xi = pseudo.points
    checks = [Check("defect<=4d", float(pseudo.max_defect(system)), 4 * float(d),
                    bool(pseudo.max_defect(system) <= 4 * d_))]
    tol = d_ * mpmath.mpf(10) ** -(15 + math.ceil(math.log10(max(float(Q), 10.0))))
    y_orbit, rep = shadow(system, pseudo, tol=tol)
    if y_orbit is None:
        return LemmaReplayReport(xi=bk.to_float(xi), y=None, t=None, b=None, z=None,
                                 checks=checks, shadow=rep, message="shadowing Newton failed", **base)
    y = y_orbit.points
    space = system.space
    inner = slice(margin, margin + 2 * n + 2)  # k in [-n, n+1]
    dist_xy = distance(space, xi, y)
    dist_inner = _max(dist_xy[inner])
    margin_dist = float(max(_max(dist_xy[:margin]), _max(dist_xy[margin + 2 * n + 2:])))
    checks.append(Check("(2.5)", float(dist_inner), 4 * float(L) * float(d),
                        bool(dist_inner <= 4 * L * d_)))
    t = exp_chart_inv(space, orbit.points[inner], y[inner]) / d_
    gap = _max(bk.norm(delta - t))
    checks.append(Check("(Add7.1.1)", float(gap), 8 * float(L), bool(gap < 8 * L)))
    t_sup = _max(bk.norm(t))
    checks.append(Check("(tk)", float(t_sup), 4 * (float(Q) + 2 * L), bool(t_sup <= 4 * (Q + 2 * L))))
    lin = _max(bk.norm(t[1:] - np.stack([A @ tk for A, tk in zip(mats, t[:-1])])))
    checks.append(Check("(mu1)", float(lin), float(mu1), bool(lin <= mu1)))
    b = [t[0]]
    for A in mats:
        b.append(A @ b[-1])
    b = np.stack(b)
    c_sup = _max(bk.norm(t - b))
    checks.append(Check("(fly1)", float(c_sup), 1.0, bool(c_sup < 1)))
    z = bk.zeros((len(y), m), True)
    z[inner] = delta - b
    z_sup = _max(bk.norm(z))
    checks.append(Check("(1.4)", float(z_sup), 8 * float(L) + 1, bool(z_sup <= 8 * L + 1)))
    z_res = recursion_residual(mats, z[inner], w)
    checks.append(Check("(1.5)", float(z_res), LIMIT_RESIDUAL_TOL, bool(z_res <= LIMIT_RESIDUAL_TOL)))
    return LemmaReplayReport(xi=bk.to_float(xi), y=bk.to_float(y), t=bk.to_float(t),
                             b=bk.to_float(b), z=bk.to_float(z), checks=checks, shadow=rep,
                             margin_dist=margin_dist, **base)


def replay_lemma2(system, p, w, n, L, d="auto", margin=REPLAY_MARGIN):
    """Run the lifted-sequence construction numerically and check every inequality.

    ``w`` holds ``w_k`` for ``k = -n..n``.  With ``d="auto"`` the defect starts at
    ``r / (4 Q)`` and is halved until the lifted pseudotrajectory has defect at most
    ``4d``, Newton shadowing converges and the linearisation inequality holds; the
    search gives up after ``AUTO_MAX_HALVINGS`` halvings.  Arithmetic runs in mpmath
    with enough digits for the exponentially large lifted vectors.
    """
    if n < 1:
        raise ContractError("n must be positive")
    if L <= 0:
        raise ContractError("L must be positive")
    space = system.space
    m = space.dimension
    w_float = _as_w(w, n, m, False)
    p = space.check_point(np.asarray(p, dtype=float))
    # magnitude of Q only; the exact value is recomputed at high precision
    orbit = orbit_of(system, p, -n, n + 1)
    mats = np.stack([system.jac(orbit[k]) for k in range(-n, n + 1)])
    Q = max(float(np.max(np.linalg.norm(_delta(mats, w_float), axis=1))), 0.0)
    auto = isinstance(d, str)
    if auto:
        if d != "auto":
            raise ContractError("d must be a positive number or 'auto'")
        d = min(space.injectivity_radius, 1.0) / (4 * max(Q, 1.0))
        attempts = AUTO_MAX_HALVINGS + 1
    else:
        d = float(d)
        if d <= 0:
            raise ContractError("d must be positive")
        attempts = 1
    report = None
    for halving in range(attempts):
        digits = _digits(d, Q)
        with mpmath.workdps(digits):
            report = _replay_once(system, p, w_float, n, L, d, margin)
        report.halvings = halving
        report.digits = digits
        if not auto or _small_enough(report):
            return report
        d /= 2
    report.message = (f"auto-d gave up after {AUTO_MAX_HALVINGS} halvings (d={report.d:.3g}); "
                      + report.message).strip()
    return report


def _small_enough(report):
    needed = {"defect<=4d", "(mu1)"}
    got = {c.name: c.passed for c in report.checks}
    return report.shadow is not None and report.shadow.converged and all(
        got.get(name, False) for name in needed)


# --- bounded limit ----------------------------------------------------------------

@dataclass(frozen=True)
class WPattern:
    """A bounded inhomogeneity ``w_k`` defined for every integer ``k``.

    ``kind`` is ``"constant"`` (``values[0]``), ``"periodic"`` (``values[k % period]``)
    or ``"random"`` (uniform in the ball of radius ``amplitude``, drawn from the
    stream ``(seed, k)`` so every truncation sees the same values).
    """
    kind: str
    values: Optional[tuple] = None
    seed: int = 0
    amplitude: float = 0.9
    dimension: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "periodic", "random"):
            raise ContractError(f"unknown pattern kind {self.kind!r}")
        if self.kind != "random":
            vals = np.atleast_2d(np.asarray(self.values, dtype=float))
            if vals.shape[1] != self.dimension and vals.shape[0] == self.dimension and vals.shape[1] != 1:
                vals = vals.T
            object.__setattr__(self, "values", tuple(map(tuple, vals)))
            object.__setattr__(self, "dimension", vals.shape[1])
            if np.any(np.linalg.norm(vals, axis=1) >= 1):
                raise ContractError("pattern values need |w_k| < 1")
        elif not 0 <= self.amplitude < 1:
            raise ContractError("amplitude must lie in [0, 1)")

    def __call__(self, k):
        if self.kind == "random":
            return uniform_ball(stream(self.seed, k + 2**31), 1, self.dimension, self.amplitude)[0]
        vals = self.values
        return np.array(vals[0] if self.kind == "constant" else vals[k % len(vals)])

    def window(self, n):
        return np.stack([self(k) for k in range(-n, n + 1)])


@dataclass(frozen=True)
class LimitReport:
    n_grid: tuple
    inner: int
    changes: tuple
    v: np.ndarray  # z^(n) for the largest n on [-n, n+1]
    k_min: int
    sup_norm: float
    bound: float
    residual: float
    stabilized: bool
    oracle_residual: float
    oracle_sup: float
    replays: tuple = field(repr=False, default=())

    @property
    def passed(self):
        return (self.stabilized and self.sup_norm <= self.bound
                and self.residual <= LIMIT_RESIDUAL_TOL and self.oracle_residual <= LIMIT_RESIDUAL_TOL)


def extract_limit(system, p, w, n_grid, L, inner=None, margin=REPLAY_MARGIN):
    """Track the replay sequences ``z^(n)`` as the truncation grows.

    Changes are measured on the inner window ``[-inner, inner]`` (default: half the
    smallest ``n``).  The sequence for the largest ``n`` is the numerical limit ``v``;
    it is checked against ``|v_k| <= 8L + 1`` and the recursion.  As an independent
    construction, the minimal-norm bounded solution on the same window is reported.
    """
    n_grid = tuple(sorted(int(n) for n in n_grid))
    if len(n_grid) < 2:
        raise ContractError("need at least two truncation sizes")
    if inner is None:
        inner = n_grid[0] // 2
    replays = []
    for n in n_grid:
        replays.append(replay_lemma2(system, p, w.window(n), n, L, d="auto", margin=margin))
    changes = []
    for prev, cur in zip(replays, replays[1:]):
        if prev.z is None or cur.z is None:
            changes.append(math.inf)
            continue
        zp = prev.z[-inner - prev.k_min: inner - prev.k_min + 1]
        zc = cur.z[-inner - cur.k_min: inner - cur.k_min + 1]
        changes.append(float(np.max(np.linalg.norm(zc - zp, axis=1))))
    stabilized = all(math.isfinite(c) for c in changes) and all(
        b <= a for a, b in zip(changes, changes[1:]))
    last = replays[-1]
    n = n_grid[-1]
    m = system.space.dimension
    if last.z is None:
        v = np.full((2 * n + 2, m), math.nan)
        residual = math.inf
    else:
        v = last.z[-n - last.k_min: n + 1 - last.k_min + 1]
        res = last.check("(1.5)")
        residual = res.value
    w_n = w.window(n)
    orbit = orbit_of(system, p, -n - margin, n + 1 + margin)
    cocycle = along_orbit(system, orbit)
    w_full = np.zeros((len(cocycle.matrices), m))
    w_full[margin: margin + 2 * n + 1] = w_n
    oracle = solve_bounded(cocycle, w_full)
    return LimitReport(
        n_grid=n_grid, inner=inner, changes=tuple(changes), v=v, k_min=-n,
        sup_norm=float(np.max(np.linalg.norm(v, axis=1))), bound=8 * L + 1,
        residual=float(residual), stabilized=stabilized,
        oracle_residual=float(oracle.residual), oracle_sup=float(oracle.sup_norm),
        replays=tuple(replays),
    )
