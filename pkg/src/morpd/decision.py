"""Preference-aware compromise-solution extraction from a Pareto front.

The front is soft-clustered in normalized objective space with fuzzy
c-means, clusters are canonically ordered (economy first: lowest mean
normalized power loss), and one best compromise solution per cluster is
picked by grey relational projection: each member's grey coefficients
against the ideal and negative-ideal reference series are projected onto
the weight vector and combined into a priority membership in [0, 1].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FcmParams:
    n_clusters: int = 2
    fuzziness: float = 2.0
    tolerance: float = 1e-6
    max_iter: int = 300
    seed: int = 0
    restarts: int = 0         # extra seeded random-center restarts

    def __post_init__(self):
        if self.n_clusters < 2:
            raise ValueError("n_clusters must be at least 2")
        if self.fuzziness <= 1.0:
            raise ValueError("fuzziness must be greater than 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class GrpWeights:
    """Positive per-objective weights; equal by default."""

    values: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self):
        if any(w <= 0 for w in self.values):
            raise ValueError("weights must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


@dataclass
class BcsReport:
    """Everything the decision step derives from a front.

    ``labels`` index into canonical clusters: 0 = economy preference
    (lowest mean normalized loss), 1 = security preference, and so on.
    ``bcs_indices[c]`` is the front index chosen for cluster ``c``.
    """

    objectives: np.ndarray                 # (n, 2) raw front objectives
    normalized: np.ndarray                 # (n, 2) whole-front min-max
    memberships: np.ndarray                # (n, n_clusters)
    centers: np.ndarray                    # (n_clusters, 2)
    labels: np.ndarray                     # (n,)
    priority: np.ndarray                   # (n,) whole-front p_l
    cluster_priority: np.ndarray           # (n,) p_l recomputed inside clusters
    bcs_indices: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def normalize_objectives(objectives: np.ndarray) -> np.ndarray:
    """Min-max scale each objective column to [0, 1]; 0 is the best observed.

    A zero-range column maps to all zeros.
    """
    objectives = np.asarray(objectives, dtype=float)
    if objectives.ndim != 2 or objectives.shape[0] == 0:
        raise ValueError("objectives must be a non-empty (n, m) array")
    lo = objectives.min(axis=0)
    span = objectives.max(axis=0) - lo
    out = np.zeros_like(objectives)
    ok = span > 0
    out[:, ok] = (objectives[:, ok] - lo[ok]) / span[ok]
    return out


def _fcm_memberships(points: np.ndarray, centers: np.ndarray, n: float) -> np.ndarray:
    """Membership update for fixed centers, with the coincident-point rule."""
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    m = np.zeros((points.shape[0], centers.shape[0]))
    zero = d2 <= 1e-30
    for p in range(points.shape[0]):
        if zero[p].any():
            hits = np.flatnonzero(zero[p])
            m[p, hits] = 1.0 / hits.size
        else:
            ratio = d2[p][:, None] / d2[p][None, :]     # (q, r) -> d_q^2 / d_r^2
            m[p] = 1.0 / (ratio ** (1.0 / (n - 1.0))).sum(axis=1)
    return m


def fcm_loss(points: np.ndarray, m: np.ndarray, centers: np.ndarray,
             n: float) -> float:
    """Fuzzified within-cluster squared-distance objective."""
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return float(((m ** n) * d2).sum())


def _extreme_point_centers(points: np.ndarray, n_clusters: int) -> np.ndarray:
    """Deterministic seeds: the first-objective minimum, then farthest points.

    On a mutually non-dominated front this picks the per-objective extreme
    points; on degenerate inputs the farthest-point rule keeps the centers
    distinct whenever the data allows it.
    """
    centers = [points[int(np.argmin(points[:, 0]))]]
    while len(centers) < n_clusters:
        d2 = np.min([((points - c) ** 2).sum(axis=1) for c in centers], axis=0)
        centers.append(points[int(np.argmax(d2))])
    return np.array(centers, dtype=float)


def fcm(points: np.ndarray, params: FcmParams) -> tuple[np.ndarray, np.ndarray]:
    """Fuzzy c-means on normalized points.

    Returns (memberships, centers).  Alternates the membership and center
    updates until the largest center movement drops below the tolerance.
    Emits a warning (and still returns) when there are fewer distinct
    points than clusters.
    """
    points = np.asarray(points, dtype=float)
    if points.shape[0] < params.n_clusters:
        raise ValueError("need at least n_clusters points")
    if np.unique(points, axis=0).shape[0] < params.n_clusters:
        warnings.warn("fewer distinct points than clusters; centers will coincide")

    rng = np.random.default_rng(params.seed)
    best = None
    for restart in range(params.restarts + 1):
        if restart == 0:
            centers = _extreme_point_centers(points, params.n_clusters)
        else:
            centers = points[rng.choice(points.shape[0], params.n_clusters,
                                        replace=False)]
        for _ in range(params.max_iter):
            m = _fcm_memberships(points, centers, params.fuzziness)
            w = m ** params.fuzziness
            denom = w.sum(axis=0)
            moved = 0.0
            new_centers = centers.copy()
            for q in range(params.n_clusters):
                if denom[q] > 0:
                    new_centers[q] = (w[:, q][:, None] * points).sum(axis=0) / denom[q]
                moved = max(moved, float(np.linalg.norm(new_centers[q] - centers[q])))
            centers = new_centers
            if moved <= params.tolerance:
                break
        m = _fcm_memberships(points, centers, params.fuzziness)
        loss = fcm_loss(points, m, centers, params.fuzziness)
        if best is None or loss < best[0]:
            best = (loss, m, centers)
    return best[1], best[2]


def assign_clusters(memberships: np.ndarray,
                    normalized: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hard labels (argmax, ties to the lower index) in canonical order.

    Clusters are renumbered so cluster 0 has the lowest mean normalized
    first objective among its members (the economy preference), cluster 1
    the next, and so on; empty clusters sort last.  Returns (labels,
    permutation) where ``permutation[new] = old``.
    """
    raw = np.argmax(memberships, axis=1)
    n_clusters = memberships.shape[1]
    means = []
    for q in range(n_clusters):
        sel = raw == q
        means.append(float(normalized[sel, 0].mean()) if sel.any() else math.inf)
    perm = sorted(range(n_clusters), key=lambda q: (means[q], q))
    relabel = {old: new for new, old in enumerate(perm)}
    return np.array([relabel[q] for q in raw]), np.array(perm)


def grey_relational_coefficients(normalized: np.ndarray, direction: str,
                                 rho: float = 0.5) -> np.ndarray:
    """Deng grey relational coefficients against a reference series.

    In cost-normalized space the ideal reference is the zero vector and the
    negative ideal is the unit vector.  ``rho`` is the distinguishing
    coefficient.
    """
    normalized = np.asarray(normalized, dtype=float)
    if direction == "ideal":
        ref = np.zeros(normalized.shape[1])
    elif direction == "negative":
        ref = np.ones(normalized.shape[1])
    else:
        raise ValueError("direction must be 'ideal' or 'negative'")
    delta = np.abs(normalized - ref)
    dmin, dmax = delta.min(), delta.max()
    if dmax <= 0:
        return np.ones_like(delta)
    return (dmin + rho * dmax) / (delta + rho * dmax)


def grp_projection(gr_plus: np.ndarray, gr_minus: np.ndarray,
                   weights: GrpWeights) -> tuple[np.ndarray, np.ndarray]:
    """Project the coefficient rows onto the weighted reference directions."""
    lam = weights.as_array()
    if gr_plus.shape != gr_minus.shape or gr_plus.shape[1] != lam.size:
        raise ValueError("coefficient matrices and weights disagree in shape")
    scale = math.sqrt(float((lam ** 2).sum()))
    pr_plus = (gr_plus * lam ** 2).sum(axis=1) / scale
    pr_minus = (gr_minus * lam ** 2).sum(axis=1) / scale
    return pr_plus, pr_minus


def priority_membership(pr_plus: np.ndarray, pr_minus: np.ndarray) -> np.ndarray:
    """p = pr+ / (pr+ + pr-), in [0, 1]; larger is better."""
    total = pr_plus + pr_minus
    if np.any(total <= 0):
        raise ValueError("pr+ + pr- must be positive")
    return pr_plus / total


def _grp_priority(normalized: np.ndarray, weights: GrpWeights,
                  rho: float) -> np.ndarray:
    gr_p = grey_relational_coefficients(normalized, "ideal", rho)
    gr_m = grey_relational_coefficients(normalized, "negative", rho)
    return priority_membership(*grp_projection(gr_p, gr_m, weights))


def select_bcs(objectives: np.ndarray,
               fcm_params: FcmParams | None = None,
               weights: GrpWeights | None = None,
               rho: float = 0.5) -> BcsReport:
    """Full decision pipeline: cluster the front, pick one BCS per cluster.

    Grey relational projection is recomputed inside each cluster (with
    cluster-local normalization) so a compromise reflects only its own
    preference group; the whole-front priority membership is also reported.
    Ties on priority go to the lower first objective, then the lower index.
    A cluster that ends up empty degrades the report to the surviving
    clusters with a warning.
    """
    fcm_params = fcm_params or FcmParams()
    weights = weights or GrpWeights()
    objectives = np.asarray(objectives, dtype=float)
    normalized = normalize_objectives(objectives)

    n = objectives.shape[0]
    report = BcsReport(
        objectives=objectives, normalized=normalized,
        memberships=np.ones((n, 1)), centers=np.zeros((1, 2)),
        labels=np.zeros(n, dtype=int),
        priority=_grp_priority(normalized, weights, rho),
        cluster_priority=np.zeros(n),
    )
    if n < fcm_params.n_clusters:
        report.warnings.append(
            f"front has {n} members, fewer than {fcm_params.n_clusters} clusters; "
            "single-cluster mode"
        )
        report.cluster_priority = report.priority.copy()
        report.bcs_indices = [_argbest(report.priority, objectives, range(n))]
        return report

    memberships, centers = fcm(normalized, fcm_params)
    labels, perm = assign_clusters(memberships, normalized)
    report.memberships = memberships[:, perm]
    report.centers = centers[perm]
    report.labels = labels

    for c in range(fcm_params.n_clusters):
        sel = np.flatnonzero(labels == c)
        if sel.size == 0:
            report.warnings.append(f"cluster {c} is empty; skipping its BCS")
            continue
        local = normalize_objectives(objectives[sel])
        p_local = _grp_priority(local, weights, rho)
        report.cluster_priority[sel] = p_local
        report.bcs_indices.append(_argbest(p_local, objectives[sel], sel))
    return report


def _argbest(priority: np.ndarray, objectives: np.ndarray, indices) -> int:
    """Index (into the full front) of the max-priority row; ties by loss, index."""
    indices = list(indices)
    order = sorted(
        range(len(indices)),
        key=lambda i: (-priority[i], objectives[i, 0] if objectives.ndim == 2 else 0, i),
    )
    return int(indices[order[0]])
