"""Front-quality indicators and weighted-sum reference-front construction.

GD, spread, and IGD are computed in raw objective units (MW, dimensionless
voltage deviation) so their magnitudes stay comparable across runs; a
normalized mode is available.  The reference front comes from repeated
single-objective differential-evolution runs on a weighted sum of the two
normalized objectives, which is this toolkit's stand-in for an external
single-objective optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import NetworkCase, control_bounds
from .powerflow import evaluate
from .moea import _EvalPool, _random_population, de_mutation, de_crossover, Individual


@dataclass(frozen=True)
class MetricReport:
    gd: float
    spread: float
    igd: float
    n_approx: int
    n_reference: int
    normalized: bool = False


def _pairwise_min_dist(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Distance from each row of ``points`` to its nearest row of ``targets``."""
    d = np.linalg.norm(points[:, None, :] - targets[None, :, :], axis=2)
    return d.min(axis=1)


def _as_points(front) -> np.ndarray:
    pts = np.asarray(front, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != 2:
        raise ValueError("a front must be a non-empty (n, 2) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("front contains non-finite values")
    return pts


def gd(approx, reference) -> float:
    """Generational distance: mean distance from approx points to the reference."""
    a, r = _as_points(approx), _as_points(reference)
    return float(_pairwise_min_dist(a, r).mean())


def igd(approx, reference) -> float:
    """Inverted generational distance: mean distance from reference to approx."""
    a, r = _as_points(approx), _as_points(reference)
    return float(_pairwise_min_dist(r, a).mean())


def spread(front, reference) -> float:
    """Distribution metric over the front sorted along the trade-off curve.

    Interior uniformity comes from consecutive-gap deviations; the boundary
    terms are the distances from the front's two ends to the reference
    front's per-objective extreme points.
    """
    f = _as_points(front)
    r = _as_points(reference)
    if f.shape[0] < 2:
        raise ValueError("spread needs at least two front points")
    f = f[np.lexsort((f[:, 1], f[:, 0]))]
    gaps = np.linalg.norm(np.diff(f, axis=0), axis=1)
    mean_gap = float(gaps.mean())

    ext_first = r[int(np.argmin(r[:, 0]))]    # reference extreme: best obj 1
    ext_last = r[int(np.argmin(r[:, 1]))]     # reference extreme: best obj 2
    d_f = float(np.linalg.norm(f[0] - ext_first))
    d_l = float(np.linalg.norm(f[-1] - ext_last))

    num = d_f + d_l + float(np.abs(gaps - mean_gap).sum())
    den = d_f + d_l + (len(gaps)) * mean_gap
    if den == 0:
        return 0.0
    return num / den


def metric_report(approx, reference, normalized: bool = False) -> MetricReport:
    """All three indicators at once, optionally in min-max normalized space."""
    a, r = _as_points(approx), _as_points(reference)
    if normalized:
        both = np.vstack([a, r])
        lo = both.min(axis=0)
        span = both.max(axis=0) - lo
        span[span <= 0] = 1.0
        a = (a - lo) / span
        r = (r - lo) / span
    return MetricReport(gd=gd(a, r), spread=spread(a, r), igd=igd(a, r),
                        n_approx=len(a), n_reference=len(r),
                        normalized=normalized)


def nondominated_filter(points: np.ndarray) -> np.ndarray:
    """Rows of ``points`` not dominated by any other row (minimization)."""
    pts = _as_points(points)
    keep = []
    for i, p in enumerate(pts):
        dominated = False
        for j, q in enumerate(pts):
            if i == j:
                continue
            if q[0] <= p[0] and q[1] <= p[1] and (q[0] < p[0] or q[1] < p[1]):
                dominated = True
                break
            # exact duplicates: keep only the first occurrence
            if q[0] == p[0] and q[1] == p[1] and j < i:
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return pts[keep]


# ---------------------------------------------------------------------------
# Weighted-sum reference front
# ---------------------------------------------------------------------------

def _de_scalar_min(case: NetworkCase, objective, budget: int, pop_size: int,
                   f: float, cr: float, rng: np.random.Generator,
                   pool) -> tuple[np.ndarray, tuple[float, float]]:
    """Single-objective DE (rand/1/bin, greedy one-to-one selection).

    ``objective`` maps (p_loss, vd) to a scalar.  Feasibility-first
    comparison: a feasible point beats an infeasible one, two infeasible
    points compare by violation.  Returns the best control vector's raw
    objective pair and its scalar value.
    """
    bounds = control_bounds(case)
    us = _random_population(bounds, pop_size, rng)
    results = pool(us)
    evals = len(us)
    pop = [Individual(u=u, objectives=obj, violation=vio.total)
           for u, (obj, vio) in zip(us, results)]
    fitness = [objective(*ind.objectives.as_tuple()) if ind.feasible else math.inf
               for ind in pop]

    def better(i_new, ind_new, fit_new, ind_old, fit_old):
        if ind_new.feasible != ind_old.feasible:
            return ind_new.feasible
        if not ind_new.feasible:
            return ind_new.violation <= ind_old.violation
        return fit_new <= fit_old

    while evals + pop_size <= budget:
        trials = []
        for i in range(pop_size):
            donor = de_mutation(pop, i, f, bounds, rng)
            trials.append(de_crossover(pop[i].u.as_array(), donor, cr, bounds, rng))
        trial_us = [bounds.to_vector(t) for t in trials]
        results = pool(trial_us)
        evals += len(trial_us)
        for i, (u, (obj, vio)) in enumerate(zip(trial_us, results)):
            ind = Individual(u=u, objectives=obj, violation=vio.total)
            fit = objective(*obj.as_tuple()) if ind.feasible else math.inf
            if better(i, ind, fit, pop[i], fitness[i]):
                pop[i] = ind
                fitness[i] = fit

    best = min(range(pop_size), key=lambda i: (not pop[i].feasible,
                                               fitness[i], pop[i].violation))
    return pop[best].u.as_array(), pop[best].objectives.as_tuple()


def build_reference_front(case: NetworkCase, n_weights: int = 100,
                          per_run_budget: int = 2000, pop_size: int = 40,
                          f: float = 0.5, cr: float = 0.9, seed: int = 0,
                          jobs: int = 1) -> np.ndarray:
    """Reference front from ``n_weights`` weighted-sum scalarization runs.

    Anchor runs at w=1 (pure loss) and w=0 (pure deviation) fix the min-max
    normalization of both objectives; the remaining weights interpolate
    uniformly.  Every run uses an independently derived seed.  The union of
    all run winners is filtered to its non-dominated subset.
    """
    if n_weights < 1:
        raise ValueError("n_weights must be at least 1")
    pool = _EvalPool(case, jobs)
    try:
        points = []
        rng = np.random.default_rng([seed, 0])
        _, loss_anchor = _de_scalar_min(case, lambda pl, vd: pl, per_run_budget,
                                        pop_size, f, cr, rng, pool)
        points.append(loss_anchor)
        if n_weights >= 2:
            rng = np.random.default_rng([seed, 1])
            _, vd_anchor = _de_scalar_min(case, lambda pl, vd: vd, per_run_budget,
                                          pop_size, f, cr, rng, pool)
            points.append(vd_anchor)

            # anchor-based min-max normalization for the interior weights;
            # a failed (non-finite) anchor falls back to raw units
            pl_lo, vd_hi = loss_anchor
            pl_hi, vd_lo = vd_anchor
            pl_span = pl_hi - pl_lo if math.isfinite(pl_hi - pl_lo) and pl_hi > pl_lo else 1.0
            vd_span = vd_hi - vd_lo if math.isfinite(vd_hi - vd_lo) and vd_hi > vd_lo else 1.0
            if not math.isfinite(pl_lo):
                pl_lo = 0.0
            if not math.isfinite(vd_lo):
                vd_lo = 0.0

            for i, w in enumerate(np.linspace(1.0, 0.0, n_weights)):
                if w in (0.0, 1.0):
                    continue      # anchors already solved
                rng = np.random.default_rng([seed, 2 + i])

                def scalar(pl, vd, w=w):
                    return w * (pl - pl_lo) / pl_span + (1 - w) * (vd - vd_lo) / vd_span

                _, pair = _de_scalar_min(case, scalar, per_run_budget, pop_size,
                                         f, cr, rng, pool)
                points.append(pair)
    finally:
        pool.close()

    pts = np.array(points, dtype=float)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    if pts.shape[0] == 0:
        raise RuntimeError("no scalarization run produced a converged solution")
    front = nondominated_filter(pts)
    return front[np.lexsort((front[:, 1], front[:, 0]))]
