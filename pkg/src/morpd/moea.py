"""Pareto-domination evolutionary optimizer with classifier pre-selection.

Each generation labels the current population by non-domination rank and
crowding (best half promising, worst half not), trains a k-nearest-neighbor
classifier on the labeled control vectors, and screens several
differential-evolution trial vectors per parent so that only the most
promising candidate spends a real power-flow evaluation.  Environmental
selection is elitist non-dominated sorting with crowding truncation, and an
external archive keeps the best feasible non-dominated set found so far.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field

import numpy as np

from .network import Bounds, ControlVector, NetworkCase, control_bounds
from .powerflow import ObjectivePair, ViolationReport, evaluate


@dataclass
class Individual:
    u: ControlVector
    objectives: ObjectivePair
    violation: float
    rank: int = 0
    crowding: float = 0.0
    label: int = 0            # +1 promising, -1 unpromising, 0 unset

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0


@dataclass(frozen=True)
class MoeaParams:
    """Optimizer parameters; defaults follow the reference configuration."""

    n: int = 100              # population size
    eval_budget: int = 10000  # maximum real evaluations
    f: float = 0.5            # DE mutation factor
    cr: float = 1.0           # DE crossover rate
    k: int = 5                # KNN neighbor count
    n_cand: int = 3           # candidate trials screened per parent
    seed: int = 0
    archive_cap: int | None = None   # defaults to n

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("population size must be at least 4 for DE")
        if not 0.0 < self.f <= 1.0:
            raise ValueError("mutation factor f must be in (0, 1]")
        if not 0.0 <= self.cr <= 1.0:
            raise ValueError("crossover rate cr must be in [0, 1]")
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError("k must be a positive odd number")
        if self.n_cand < 1:
            raise ValueError("n_cand must be at least 1")

    @property
    def cap(self) -> int:
        return self.n if self.archive_cap is None else self.archive_cap


@dataclass
class RunReport:
    seed: int
    params: MoeaParams
    evaluations: int = 0
    generations: int = 0
    trace: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Domination machinery
# ---------------------------------------------------------------------------

def dominates(a: Individual, b: Individual) -> bool:
    """Constraint-domination: feasibility first, then Pareto order."""
    if a.feasible and not b.feasible:
        return True
    if not a.feasible:
        return (not b.feasible) and a.violation < b.violation
    ap, bp = a.objectives.as_tuple(), b.objectives.as_tuple()
    return ap[0] <= bp[0] and ap[1] <= bp[1] and ap != bp


def nondominated_sort(pop: list[Individual]) -> list[list[int]]:
    """Fast non-dominated sorting; assigns ``rank`` (1-based) in place."""
    n = len(pop)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    n_dominators = [0] * n
    fronts: list[list[int]] = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(pop[p], pop[q]):
                dominated_by[p].append(q)
            elif dominates(pop[q], pop[p]):
                n_dominators[p] += 1
        if n_dominators[p] == 0:
            pop[p].rank = 1
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                n_dominators[q] -= 1
                if n_dominators[q] == 0:
                    pop[q].rank = i + 2
                    nxt.append(q)
        i += 1
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(front: list[Individual]) -> np.ndarray:
    """Per-member crowding distance; boundary members get +inf.

    A zero or non-finite objective range contributes nothing, so duplicated
    and non-converged (infinite-objective) members stay well defined.
    """
    m = len(front)
    dist = np.zeros(m)
    if m <= 2:
        dist[:] = math.inf
        return dist
    for obj in range(2):
        vals = np.array([ind.objectives.as_tuple()[obj] for ind in front])
        order = np.argsort(vals, kind="stable")
        lo, hi = vals[order[0]], vals[order[-1]]
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
            continue
        span = hi - lo
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        for pos in range(1, m - 1):
            i = order[pos]
            if math.isfinite(dist[i]):
                gap = vals[order[pos + 1]] - vals[order[pos - 1]]
                dist[i] += gap / span
    return dist


def crowded_compare(a: Individual, b: Individual) -> bool:
    """True iff ``a`` strictly precedes ``b`` (lower rank, then higher crowding)."""
    if a.rank != b.rank:
        return a.rank < b.rank
    return a.crowding > b.crowding


def _crowded_order(pop: list[Individual]) -> list[int]:
    """Population indices sorted by the crowded comparison, stable in index."""
    return sorted(range(len(pop)), key=lambda i: (pop[i].rank, -pop[i].crowding, i))


def _rank_and_crowd(pop: list[Individual]) -> list[list[int]]:
    fronts = nondominated_sort(pop)
    for front in fronts:
        members = [pop[i] for i in front]
        for i, d in zip(front, crowding_distance(members)):
            pop[i].crowding = float(d)
    return fronts


# ---------------------------------------------------------------------------
# Classifier pre-selection
# ---------------------------------------------------------------------------

@dataclass
class LabeledSets:
    """Training split: promising (+1) and unpromising (-1) individuals."""

    p_plus: list[Individual]
    p_minus: list[Individual]


def label_population(pop: list[Individual]) -> LabeledSets:
    """Split the ranked population in half by crowded order; odd size favors +1."""
    order = _crowded_order(pop)
    n_plus = (len(pop) + 1) // 2
    plus, minus = [], []
    for pos, i in enumerate(order):
        if pos < n_plus:
            pop[i].label = 1
            plus.append(pop[i])
        else:
            pop[i].label = -1
            minus.append(pop[i])
    return LabeledSets(p_plus=plus, p_minus=minus)


class KnnClassifier:
    """Stores bound-normalized labeled control vectors; predicts by label sum."""

    def __init__(self, sets: LabeledSets, bounds: Bounds, k: int):
        train = sets.p_plus + sets.p_minus
        if not train:
            raise ValueError("empty training set")
        self.k = min(k, len(train))
        self.x = np.array([bounds.normalize(ind.u.as_array()) for ind in train])
        self.labels = np.array([ind.label for ind in train])
        self.bounds = bounds

    def score(self, x: np.ndarray) -> int:
        """Sum of the labels of the k nearest training vectors."""
        d = np.linalg.norm(self.x - self.bounds.normalize(x), axis=1)
        nearest = np.argsort(d, kind="stable")[: self.k]
        return int(self.labels[nearest].sum())

    def classify(self, x: np.ndarray) -> int:
        return 1 if self.score(x) >= 0 else -1


def knn_classify(candidate: ControlVector, sets: LabeledSets,
                 k: int, bounds: Bounds) -> int:
    """Label of ``candidate`` under the k-nearest-neighbor vote."""
    return KnnClassifier(sets, bounds, k).classify(candidate.as_array())


# ---------------------------------------------------------------------------
# Differential-evolution reproduction
# ---------------------------------------------------------------------------

def _reflect(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Fold out-of-bound components back inside [lo, hi]."""
    x = x.copy()
    for _ in range(64):
        below = x < lo
        above = x > hi
        if not (below.any() or above.any()):
            return x
        x = np.where(below, 2 * lo - x, x)
        x = np.where(above, 2 * hi - x, x)
    return np.clip(x, lo, hi)


def de_mutation(pop: list[Individual], i: int, f: float,
                bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """rand/1 donor: x_r1 + f (x_r2 - x_r3), reflected into bounds."""
    n = len(pop)
    others = np.array([j for j in range(n) if j != i])
    r1, r2, r3 = others[rng.choice(n - 1, size=3, replace=False)]
    x1, x2, x3 = (pop[r].u.as_array() for r in (r1, r2, r3))
    donor = x1 + f * (x2 - x3)
    return _reflect(donor, bounds.lower, bounds.upper)


def de_crossover(target: np.ndarray, donor: np.ndarray, cr: float,
                 bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """Binomial crossover with one forced donor dimension, then discrete repair."""
    d = target.size
    mask = rng.random(d) <= cr
    mask[rng.integers(d)] = True
    trial = np.where(mask, donor, target)
    return bounds.round_discrete(trial, toward=target)


def preselect_offspring(parent_index: int, pop: list[Individual],
                        classifier: KnnClassifier, params: MoeaParams,
                        bounds: Bounds, rng: np.random.Generator) -> ControlVector:
    """Screen ``n_cand`` DE trials; return the first promising one.

    If no candidate is classified +1, the candidate with the largest
    neighbor-label sum (the least unpromising) is returned.  Only the
    returned candidate is meant to receive a real evaluation.
    """
    target = pop[parent_index].u.as_array()
    trials = []
    for _ in range(params.n_cand):
        donor = de_mutation(pop, parent_index, params.f, bounds, rng)
        trials.append(de_crossover(target, donor, params.cr, bounds, rng))
    if params.n_cand == 1:
        return bounds.to_vector(trials[0])
    scores = [classifier.score(t) for t in trials]
    for t, s in zip(trials, scores):
        if s >= 0:
            return bounds.to_vector(t)
    return bounds.to_vector(trials[int(np.argmax(scores))])


# ---------------------------------------------------------------------------
# Environmental selection and archive
# ---------------------------------------------------------------------------

def environmental_selection(parents: list[Individual],
                            offspring: list[Individual]) -> list[Individual]:
    """Elitist survival of the best N out of the merged 2N set."""
    n = len(parents)
    merged = parents + offspring
    fronts = _rank_and_crowd(merged)
    survivors: list[Individual] = []
    for front in fronts:
        if len(survivors) + len(front) <= n:
            survivors.extend(merged[i] for i in front)
        else:
            members = sorted(front, key=lambda i: (-merged[i].crowding, i))
            survivors.extend(merged[i] for i in members[: n - len(survivors)])
            break
    return survivors


class ParetoFront:
    """External archive of mutually non-dominated feasible individuals."""

    def __init__(self, cap: int):
        self.cap = cap
        self.members: list[Individual] = []

    def update(self, pop: list[Individual]) -> None:
        """Insert feasible members, drop dominated ones, truncate by crowding."""
        for ind in pop:
            if not ind.feasible:
                continue
            obj = ind.objectives.as_tuple()
            if any(m.objectives.as_tuple() == obj for m in self.members):
                continue
            if any(dominates(m, ind) for m in self.members):
                continue
            self.members = [m for m in self.members if not dominates(ind, m)]
            self.members.append(ind)
        if len(self.members) > self.cap:
            dist = crowding_distance(self.members)
            order = sorted(range(len(self.members)), key=lambda i: (-dist[i], i))
            self.members = [self.members[i] for i in order[: self.cap]]
        self.members.sort(key=lambda m: m.objectives.as_tuple())

    def objectives(self) -> np.ndarray:
        return np.array([m.objectives.as_tuple() for m in self.members])

    def __len__(self) -> int:
        return len(self.members)


def update_archive(archive: ParetoFront, pop: list[Individual],
                   cap: int | None = None) -> ParetoFront:
    if cap is not None:
        archive.cap = cap
    archive.update(pop)
    return archive


# ---------------------------------------------------------------------------
# Full optimizer run
# ---------------------------------------------------------------------------

_WORKER_CASE: NetworkCase | None = None


def _worker_init(case: NetworkCase) -> None:
    global _WORKER_CASE
    _WORKER_CASE = case


def _worker_eval(u: ControlVector) -> tuple[ObjectivePair, ViolationReport]:
    return evaluate(_WORKER_CASE, u)


class _EvalPool:
    """Maps control vectors to evaluations, optionally across processes.

    Results come back in input order, so the optimizer's behavior does not
    depend on the number of workers.
    """

    def __init__(self, case: NetworkCase, jobs: int = 1):
        self.case = case
        self.jobs = max(1, jobs)
        self._pool = None
        if self.jobs > 1:
            self._pool = concurrent.futures.ProcessPoolExecutor(
                max_workers=self.jobs, initializer=_worker_init,
                initargs=(case,),
            )

    def __call__(self, us: list[ControlVector]):
        if self._pool is None:
            return [evaluate(self.case, u) for u in us]
        return list(self._pool.map(_worker_eval, us, chunksize=8))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def _random_population(bounds: Bounds, n: int,
                       rng: np.random.Generator) -> list[ControlVector]:
    ng, d = bounds.n_gen, bounds.dimension
    us = []
    for _ in range(n):
        x = np.empty(d)
        x[:ng] = rng.uniform(bounds.gen_lower, bounds.gen_upper)
        x[ng:] = rng.integers(0, bounds.upper[ng:].astype(int) + 1)
        us.append(bounds.to_vector(x))
    return us


def run(case: NetworkCase, params: MoeaParams,
        jobs: int = 1) -> tuple[ParetoFront, RunReport]:
    """Run the full optimizer on ``case``.

    Seeded and deterministic: all random draws come from one generator in a
    fixed order, and evaluations (which may run concurrently when
    ``jobs > 1``) never consume randomness.
    """
    rng = np.random.default_rng(params.seed)
    bounds = control_bounds(case)
    report = RunReport(seed=params.seed, params=params)
    archive = ParetoFront(cap=params.cap)
    pool = _EvalPool(case, jobs)

    try:
        us = _random_population(bounds, params.n, rng)
        results = pool(us)
        report.evaluations += len(us)
        pop = [Individual(u=u, objectives=obj, violation=vio.total)
               for u, (obj, vio) in zip(us, results)]
        _rank_and_crowd(pop)
        archive.update(pop)
        _record(report, archive, pop)

        while report.evaluations < params.eval_budget:
            sets = label_population(pop)
            classifier = KnnClassifier(sets, bounds, params.k)
            trial_us = [
                preselect_offspring(i, pop, classifier, params, bounds, rng)
                for i in range(params.n)
            ]
            results = pool(trial_us)
            report.evaluations += len(trial_us)
            offspring = [Individual(u=u, objectives=obj, violation=vio.total)
                         for u, (obj, vio) in zip(trial_us, results)]
            pop = environmental_selection(pop, offspring)
            archive.update(pop)
            report.generations += 1
            _record(report, archive, pop)
    finally:
        pool.close()

    if not archive.members:
        # no feasible point was ever found: fall back to the final
        # non-dominated set so callers still get the least-violating front
        fronts = nondominated_sort(pop)
        archive.members = [pop[i] for i in fronts[0]]
    return archive, report


def _record(report: RunReport, archive: ParetoFront, pop: list[Individual]) -> None:
    feas = [ind for ind in pop if ind.feasible]
    entry = {
        "generation": report.generations,
        "evaluations": report.evaluations,
        "archive_size": len(archive),
        "feasible": len(feas),
    }
    if archive.members:
        objs = archive.objectives()
        entry["best_ploss"] = float(objs[:, 0].min())
        entry["best_vd"] = float(objs[:, 1].min())
    report.trace.append(entry)
