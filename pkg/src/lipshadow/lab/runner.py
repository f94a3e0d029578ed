"""Dispatch an :class:`ExperimentConfig`, collect rows, judge verdicts, write outputs.

Verdicts are computed from the stored rows only (see :func:`evaluate`), so a
manifest can always be re-judged after the fact.
"""
import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from .._rng import stream, uniform_ball
from ..cocycle import along_orbit
from ..linear_analysis import gain_estimate, mane_test
from ..phase_space import make_system, orbit_of
from ..shadowing import CHECK_NAMES, WPattern, extract_limit, lipschitz_estimate, replay_lemma2

COLUMNS = {
    "lipschitz": ["row", "window", "d", "trial", "converged", "newton_iters", "sup_dist",
                  "l_empirical", "residual"],
    "mane": ["row", "point", "n", "dim_b_plus", "dim_b_minus", "sv_gap_plus", "sv_gap_minus",
             "degenerate", "transversality_defect"],
    "gain": ["row", "window", "half_length", "trials", "gain"],
    "replay": ["row", "trial", "d", "halvings", "check", "value", "bound", "passed"],
    "limit": ["row", "source", "n", "d", "change", "sup_norm", "bound", "residual"],
}


@dataclass
class RunManifest:
    config: dict
    version: str
    rows: list
    verdicts: list
    wall_clock: list = field(default_factory=list)

    @property
    def passed(self):
        return all(v["passed"] for v in self.verdicts)

    def to_json(self):
        return json.dumps({
            "toolkit_version": self.version,
            "config": self.config,
            "rows": [{k: _json_value(v) for k, v in r.items()} for r in self.rows],
            "verdicts": self.verdicts,
            "passed": self.passed,
            "wall_clock": self.wall_clock,
        }, indent=2)

    def rows_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = COLUMNS[self.config["kind"]]
        writer.writerow(cols)
        for r in self.rows:
            writer.writerow([_csv_value(r[c]) for c in cols])
        return buf.getvalue()

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            fh.write(self.to_json())
        with open(os.path.join(out_dir, "rows.csv"), "w", newline="") as fh:
            fh.write(self.rows_csv())


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _point(config, system):
    if config.point is not None:
        return np.asarray(config.point, dtype=float).reshape(system.space.dimension)
    if system.space.topology == "torus":
        return stream(config.seed, 2**32 - 1).uniform(size=system.space.dimension)
    return np.zeros(system.space.dimension)


def _lipschitz(config, system):
    rows, clock = [], []
    x0 = _point(config, system)
    for window in config.window:
        table = lipschitz_estimate(system, x0, int(window), config.d_grid, config.trials,
                                   config.seed, config.noise)
        for row in table.rows:
            first = len(rows)
            for trial, rep in enumerate(row.trials):
                rows.append({"row": len(rows), "window": int(window), "d": row.d, "trial": trial,
                             "converged": rep.converged, "newton_iters": rep.newton_iters,
                             "sup_dist": rep.sup_dist, "l_empirical": rep.l_empirical,
                             "residual": rep.residual})
            clock.append({"rows": [first, len(rows) - 1], "seconds": row.seconds})
    return rows, clock


def _mane(config, system):
    start = time.perf_counter()
    p = _point(config, system)
    rep = mane_test(system, p, config.n)
    row = {"row": 0, "point": ";".join(repr(float(x)) for x in p), "n": config.n,
           "dim_b_plus": rep.b_plus.shape[1], "dim_b_minus": rep.b_minus.shape[1],
           "sv_gap_plus": rep.sv_gap_plus, "sv_gap_minus": rep.sv_gap_minus,
           "degenerate": rep.degenerate, "transversality_defect": rep.transversality_defect}
    return [row], [{"rows": [0, 0], "seconds": time.perf_counter() - start}]


def _gain(config, system):
    rows, clock = [], []
    p = _point(config, system)
    for window in config.window:
        start = time.perf_counter()
        window = int(window)
        orbit = orbit_of(system, p, -(window // 2), window - window // 2)
        g = gain_estimate(along_orbit(system, orbit), config.trials, config.seed)
        rows.append({"row": len(rows), "window": window, "half_length": window / 2,
                     "trials": config.trials, "gain": g})
        clock.append({"rows": [len(rows) - 1] * 2, "seconds": time.perf_counter() - start})
    return rows, clock


def _replay(config, system):
    rows, clock = [], []
    m = system.space.dimension
    n = config.n
    for trial in range(config.trials):
        start = time.perf_counter()
        rng = stream(config.seed, trial)
        p = (np.asarray(config.point, dtype=float) if config.point is not None
             else rng.uniform(size=m))
        w = uniform_ball(rng, 2 * n + 1, m, config.amplitude)
        rep = replay_lemma2(system, p, w, n, config.L, config.d)
        first = len(rows)
        for c in rep.checks:
            rows.append({"row": len(rows), "trial": trial, "d": rep.d, "halvings": rep.halvings,
                         "check": c.name, "value": c.value, "bound": c.bound, "passed": c.passed})
        clock.append({"rows": [first, len(rows) - 1], "seconds": time.perf_counter() - start})
    return rows, clock


def _pattern(config, m):
    if config.pattern == "random":
        return WPattern("random", seed=config.seed, amplitude=config.amplitude, dimension=m)
    count = config.period if config.pattern == "periodic" else 1
    values = uniform_ball(stream(config.seed, 0), count, m, config.amplitude)
    return WPattern(config.pattern, values=tuple(map(tuple, values)), dimension=m)


def _limit(config, system):
    start = time.perf_counter()
    p = _point(config, system)
    rep = extract_limit(system, p, _pattern(config, system.space.dimension), config.n_grid,
                        config.L)
    rows = []
    for i, r in enumerate(rep.replays):
        z_inner = r.z[-r.n - r.k_min: r.n + 2 - r.k_min] if r.z is not None else None
        rows.append({"row": i, "source": "replay", "n": r.n, "d": r.d,
                     "change": rep.changes[i - 1] if i else None,
                     "sup_norm": float(np.max(np.linalg.norm(z_inner, axis=1)))
                     if z_inner is not None else math.inf,
                     "bound": 8 * config.L + 1,
                     "residual": r.check("(1.5)").value if r.z is not None else math.inf})
    rows.append({"row": len(rows), "source": "oracle", "n": rep.n_grid[-1], "d": None,
                 "change": None, "sup_norm": rep.oracle_sup, "bound": 8 * config.L + 1,
                 "residual": rep.oracle_residual})
    return rows, [{"rows": [0, len(rows) - 1], "seconds": time.perf_counter() - start}]


_DISPATCH = {"lipschitz": _lipschitz, "mane": _mane, "gain": _gain, "replay": _replay,
             "limit": _limit}


def _verdict(name, passed, detail=""):
    return {"name": name, "passed": bool(passed), "detail": detail}


def evaluate(config, rows):
    """Judge ``rows`` against the thresholds in ``config``; returns verdict dicts."""
    stable = config.expect == "stable"
    kind = config.kind
    if kind == "lipschitz":
        groups = {}
        for r in rows:
            groups.setdefault((r["window"], r["d"]), []).append(r)
        out = []
        for window in sorted({w for w, _ in groups}):
            ds = sorted((d for w, d in groups if w == window), reverse=True)
            best = {d: max((r["l_empirical"] for r in groups[window, d] if r["converged"]),
                           default=math.nan) for d in ds}
            rate = {d: np.mean([r["converged"] for r in groups[window, d]]) for d in ds}
            if stable:
                vals = list(best.values())
                all_conv = all(rate[d] == 1.0 for d in ds)
                l_max = max(vals) if all_conv else math.inf
                ratio = max(vals) / min(vals) if all_conv and min(vals) > 0 else math.inf
                out += [
                    _verdict(f"window {window}: every run converges", all_conv),
                    _verdict(f"window {window}: max l_empirical <= {config.l_max}",
                             l_max <= config.l_max, f"max {l_max:.6g}"),
                    _verdict(f"window {window}: max/min row <= {config.l_ratio_max}",
                             ratio <= config.l_ratio_max, f"ratio {ratio:.6g}"),
                ]
            else:
                hi, lo = ds[0], ds[-1]
                factor = best[lo] / best[hi] if best[hi] > 0 else math.inf
                grows = factor >= config.divergence_factor
                diverges = 1 - rate[lo] >= config.divergence_rate
                out.append(_verdict(
                    f"window {window}: l({lo:g}) >= {config.divergence_factor} x l({hi:g}) "
                    f"or divergence >= {config.divergence_rate:.0%} at d={lo:g}",
                    grows or diverges,
                    f"factor {factor:.6g}, divergence rate {1 - rate[lo]:.3g}"))
        return out
    if kind == "mane":
        defect = rows[0]["transversality_defect"]
        transversal = defect > config.defect_min
        text = f"transversality {'PASS' if transversal else 'FAIL'} (defect {defect:g})"
        return [_verdict(text, transversal == stable)]
    if kind == "gain":
        gains = [r["gain"] for r in rows]
        if stable:
            variation = (max(gains) - min(gains)) / min(gains) if min(gains) > 0 else math.inf
            return [
                _verdict(f"gain <= {config.gain_max}", max(gains) <= config.gain_max,
                         f"max {max(gains):.6g}"),
                _verdict(f"variation across windows <= {config.gain_variation:.0%}",
                         variation <= config.gain_variation, f"variation {variation:.3g}"),
            ]
        slopes = [r["gain"] / r["half_length"] for r in rows]
        return [_verdict(f"gain >= {config.growth_slope} x half-length",
                         min(slopes) >= config.growth_slope, f"min slope {min(slopes):.4g}")]
    if kind == "replay":
        trials = {}
        for r in rows:
            trials.setdefault(r["trial"], []).append(r)
        complete = {t: len(rs) == len(CHECK_NAMES) and all(r["passed"] for r in rs)
                    for t, rs in trials.items()}
        if stable:
            return [_verdict(f"trial {t}: all {len(CHECK_NAMES)} checks pass", ok,
                             ", ".join(r["check"] for r in trials[t] if not r["passed"]))
                    for t, ok in complete.items()]
        return [_verdict(f"trial {t}: some check fails", not ok) for t, ok in complete.items()]
    if kind == "limit":
        replays = [r for r in rows if r["source"] == "replay"]
        oracle = [r for r in rows if r["source"] == "oracle"]
        last = replays[-1]
        change = last["change"] if last["change"] is not None else math.inf
        checks = [
            _verdict(f"inner change <= {config.limit_change:g}", change <= config.limit_change,
                     f"change {change:.3g}"),
            _verdict("|v_k| <= 8L + 1", last["sup_norm"] <= last["bound"],
                     f"sup {last['sup_norm']:.6g}"),
            _verdict(f"recursion residual <= {config.residual_tol:g}",
                     last["residual"] <= config.residual_tol
                     and all(o["residual"] <= config.residual_tol for o in oracle)),
        ]
        if stable:
            return checks
        return [_verdict("limit extraction fails", not all(c["passed"] for c in checks))]
    raise ValueError(kind)


def run(config, write=True):
    """Execute ``config``; writes ``manifest.json`` and ``rows.csv`` under ``config.out``."""
    system = make_system(config.system, config.params)
    rows, clock = _DISPATCH[config.kind](config, system)
    manifest = RunManifest(config.to_dict(), __version__, rows, evaluate(config, rows), clock)
    if write:
        try:
            manifest.write(config.out)
        except OSError as exc:
            raise OSError(f"cannot write results to {config.out!r}: {exc}") from exc
    return manifest
