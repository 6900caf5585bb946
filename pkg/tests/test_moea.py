import math

import numpy as np
import pytest

from morpd.moea import (
    Individual,
    KnnClassifier,
    LabeledSets,
    MoeaParams,
    ParetoFront,
    crowded_compare,
    crowding_distance,
    de_crossover,
    de_mutation,
    dominates,
    environmental_selection,
    knn_classify,
    label_population,
    nondominated_sort,
    preselect_offspring,
    run,
    update_archive,
)
from morpd.network import Bounds, ControlVector, control_bounds
from morpd.powerflow import ObjectivePair

from conftest import random_objective_individuals


def ind(pl, vd, vio=0.0):
    return Individual(u=None, objectives=ObjectivePair(pl, vd), violation=vio)


def simple_bounds(n_cont=2, n_tap=1, n_shunt=1):
    return Bounds(
        gen_lower=np.zeros(n_cont), gen_upper=np.ones(n_cont),
        tap_steps=np.full(n_tap, 20, dtype=int),
        shunt_banks=np.full(n_shunt, 20, dtype=int),
    )


# --- dominates ---------------------------------------------------------------

def test_dominates_table_rows():
    assert dominates(ind(16.17, 3.93), ind(17.46, 6.38))


def test_dominates_strictness():
    a = ind(1.0, 2.0)
    assert not dominates(a, ind(1.0, 2.0))
    assert dominates(ind(1.0, 1.9), a)
    assert not dominates(ind(0.9, 2.1), a)


def test_constraint_domination():
    feasible = ind(99.0, 99.0, vio=0.0)
    infeasible = ind(1.0, 1.0, vio=0.2)
    worse_infeasible = ind(1.0, 1.0, vio=0.4)
    assert dominates(feasible, infeasible)
    assert not dominates(infeasible, feasible)
    assert dominates(infeasible, worse_infeasible)
    assert not dominates(worse_infeasible, infeasible)


# --- sorting and crowding ----------------------------------------------------

def brute_force_ranks(pop):
    """Domination-count oracle, independent of the library comparator."""
    def dom(a, b):
        fa, fb = a.violation == 0, b.violation == 0
        if fa != fb:
            return fa
        if not fa:
            return a.violation < b.violation
        pa = (a.objectives.p_loss, a.objectives.vd)
        pb = (b.objectives.p_loss, b.objectives.vd)
        return pa[0] <= pb[0] and pa[1] <= pb[1] and pa != pb

    remaining = set(range(len(pop)))
    ranks = {}
    level = 1
    while remaining:
        front = {p for p in remaining
                 if not any(dom(pop[q], pop[p]) for q in remaining if q != p)}
        for p in front:
            ranks[p] = level
        remaining -= front
        level += 1
    return ranks


def test_sort_all_nondominated():
    pop = [ind(0, 3), ind(1, 2), ind(2, 1), ind(3, 0)]
    fronts = nondominated_sort(pop)
    assert fronts == [[0, 1, 2, 3]]
    assert all(p.rank == 1 for p in pop)


def test_sort_chain():
    pop = [ind(3, 3), ind(2, 2), ind(1, 1)]
    nondominated_sort(pop)
    assert [p.rank for p in pop] == [3, 2, 1]


@pytest.mark.parametrize("seed", range(5))
def test_sort_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    pop = random_objective_individuals(rng, 60, infeasible_fraction=0.3,
                                       duplicates=True)
    nondominated_sort(pop)
    oracle = brute_force_ranks(pop)
    assert [p.rank for p in pop] == [oracle[i] for i in range(len(pop))]


def test_crowding_two_member_front():
    front = [ind(0, 1), ind(1, 0)]
    assert all(math.isinf(d) for d in crowding_distance(front))


def test_crowding_hand_value():
    front = [ind(0, 1), ind(0.5, 0.5), ind(1, 0)]
    d = crowding_distance(front)
    assert math.isinf(d[0]) and math.isinf(d[2])
    assert d[1] == pytest.approx(2.0)


def test_crowding_degenerate_range():
    # duplicate objective values: finite distances, zero-range objective
    # contributes nothing
    front = [ind(1, 1), ind(1, 1), ind(1, 1)]
    d = crowding_distance(front)
    assert np.all(np.isfinite(d))
    assert np.all(d == 0.0)


def test_crowding_handles_nonconverged_members():
    front = [ind(math.inf, math.inf, vio=1e6), ind(math.inf, math.inf, vio=1e6),
             ind(math.inf, math.inf, vio=1e6)]
    d = crowding_distance(front)
    assert not np.isnan(d).any()


def test_crowded_compare():
    a, b = ind(0, 0), ind(1, 1)
    a.rank, b.rank = 1, 2
    assert crowded_compare(a, b) and not crowded_compare(b, a)
    b.rank = 1
    a.crowding, b.crowding = math.inf, 0.3
    assert crowded_compare(a, b)
    b.crowding = math.inf
    assert not crowded_compare(a, b) and not crowded_compare(b, a)


# --- labeling and the classifier ----------------------------------------------

def ranked(pop):
    nondominated_sort(pop)
    for front in nondominated_sort(pop):
        for i, d in zip(front, crowding_distance([pop[j] for j in front])):
            pop[i].crowding = float(d)
    return pop


def test_label_split_even():
    rng = np.random.default_rng(0)
    pop = ranked(random_objective_individuals(rng, 100))
    sets = label_population(pop)
    assert len(sets.p_plus) == len(sets.p_minus) == 50
    assert all(p.label == 1 for p in sets.p_plus)
    assert all(p.label == -1 for p in sets.p_minus)


def test_label_split_odd():
    rng = np.random.default_rng(1)
    pop = ranked(random_objective_individuals(rng, 5))
    sets = label_population(pop)
    assert len(sets.p_plus) == 3 and len(sets.p_minus) == 2


def test_label_order_respects_crowded_compare():
    rng = np.random.default_rng(2)
    pop = ranked(random_objective_individuals(rng, 30, infeasible_fraction=0.2))
    sets = label_population(pop)
    for plus in sets.p_plus:
        for minus in sets.p_minus:
            assert not crowded_compare(minus, plus)


def test_label_identical_population_splits_by_index():
    pop = ranked([ind(1, 1) for _ in range(4)])
    sets = label_population(pop)
    assert [p.label for p in pop] == [1, 1, -1, -1]


def labeled_from_vectors(plus, minus, bounds):
    def mk(vec, label):
        u = bounds.to_vector(np.asarray(vec, dtype=float))
        i = Individual(u=u, objectives=ObjectivePair(0, 0), violation=0.0)
        i.label = label
        return i
    return LabeledSets(p_plus=[mk(v, 1) for v in plus],
                       p_minus=[mk(v, -1) for v in minus])


def test_knn_zero_distance():
    b = simple_bounds()
    sets = labeled_from_vectors([[0.5, 0.5, 10, 10]], [[0.9, 0.9, 1, 1]], b)
    u = b.to_vector(np.array([0.5, 0.5, 10.0, 10.0]))
    assert knn_classify(u, sets, k=1, bounds=b) == 1


def test_knn_majority_negative():
    b = simple_bounds()
    # one +1 close, two -1 slightly further, k=3: sum = -1
    sets = labeled_from_vectors(
        [[0.5, 0.5, 10, 10]],
        [[0.52, 0.5, 10, 10], [0.5, 0.52, 10, 10]], b)
    u = b.to_vector(np.array([0.5, 0.5, 10.0, 10.0]))
    assert knn_classify(u, sets, k=3, bounds=b) == -1


def test_knn_tie_is_promising():
    b = simple_bounds()
    sets = labeled_from_vectors([[0.4, 0.4, 10, 10]], [[0.6, 0.6, 10, 10]], b)
    u = b.to_vector(np.array([0.5, 0.5, 10.0, 10.0]))
    assert knn_classify(u, sets, k=2, bounds=b) == 1   # sum 0 counts as promising


# --- DE reproduction -----------------------------------------------------------

def population_from_arrays(arrays, bounds):
    pop = []
    for a in arrays:
        u = bounds.to_vector(np.asarray(a, dtype=float))
        pop.append(Individual(u=u, objectives=ObjectivePair(0, 0), violation=0.0))
    return pop


def test_mutation_zero_factor_returns_base():
    b = simple_bounds()
    pop = population_from_arrays(
        [[0.1, 0.1, 1, 1], [0.3, 0.3, 3, 3], [0.5, 0.5, 5, 5], [0.7, 0.7, 7, 7]], b)
    rng = np.random.default_rng(0)
    donor = de_mutation(pop, 0, f=1e-12, bounds=b, rng=rng)
    bases = [p.u.as_array() for p in pop[1:]]
    assert any(np.allclose(donor, base, atol=1e-9) for base in bases)


def test_mutation_identical_partners():
    b = simple_bounds()
    pop = population_from_arrays([[0.2, 0.2, 2, 2]] * 5, b)
    rng = np.random.default_rng(1)
    donor = de_mutation(pop, 2, f=0.5, bounds=b, rng=rng)
    assert np.allclose(donor, [0.2, 0.2, 2, 2])


def test_mutation_arithmetic_1d():
    b = Bounds(gen_lower=np.zeros(1), gen_upper=np.ones(1),
               tap_steps=np.zeros(0, dtype=int), shunt_banks=np.zeros(0, dtype=int))
    pop = population_from_arrays([[0.9], [0.5], [0.8], [0.2]], b)
    seen = set()
    for seed in range(200):
        donor = de_mutation(pop, 0, f=0.5, bounds=b, rng=np.random.default_rng(seed))
        seen.add(round(float(donor[0]), 6))
    # partners drawn from {0.5, 0.8, 0.2}: r1 + 0.5 (r2 - r3) over all orderings
    assert 0.8 in seen                     # 0.5 + 0.5*(0.8-0.2)
    assert seen <= {0.2, 0.35, 0.5, 0.65, 0.8, 0.95, 0.05}


def test_mutation_reflection_repair():
    b = simple_bounds()
    pop = population_from_arrays(
        [[0.99, 0.01, 20, 0], [0.98, 0.02, 19, 1], [0.0, 1.0, 0, 20],
         [0.97, 0.03, 18, 2]], b)
    for seed in range(50):
        donor = de_mutation(pop, 0, f=1.0, bounds=b, rng=np.random.default_rng(seed))
        assert np.all(donor >= b.lower - 1e-12)
        assert np.all(donor <= b.upper + 1e-12)


def test_crossover_cr_one_returns_rounded_donor():
    b = simple_bounds()
    target = np.array([0.1, 0.1, 1.0, 1.0])
    donor = np.array([0.9, 0.8, 10.4, 3.0])
    trial = de_crossover(target, donor, cr=1.0, bounds=b,
                         rng=np.random.default_rng(0))
    assert trial == pytest.approx([0.9, 0.8, 10.0, 3.0])


def test_crossover_cr_zero_single_dimension():
    b = simple_bounds()
    target = np.array([0.1, 0.2, 3.0, 4.0])
    donor = np.array([0.5, 0.6, 7.0, 8.0])
    for seed in range(20):
        trial = de_crossover(target, donor, cr=0.0, bounds=b,
                             rng=np.random.default_rng(seed))
        assert int(np.sum(~np.isclose(trial, target))) == 1


def test_crossover_discrete_rounding():
    b = simple_bounds()
    target = np.array([0.5, 0.5, 10.0, 10.0])
    donor = np.array([0.5, 0.5, 10.4, 10.6])
    trial = de_crossover(target, donor, cr=1.0, bounds=b,
                         rng=np.random.default_rng(3))
    assert list(trial[2:]) == [10.0, 11.0]


class FakeClassifier:
    def __init__(self, scores):
        self.scores = list(scores)
        self.calls = 0

    def score(self, x):
        s = self.scores[self.calls]
        self.calls += 1
        return s


def collect_trials(pop, parent, params, bounds, seed):
    rng = np.random.default_rng(seed)
    target = pop[parent].u.as_array()
    trials = []
    for _ in range(params.n_cand):
        donor = de_mutation(pop, parent, params.f, bounds, rng)
        trials.append(bounds.to_vector(
            de_crossover(target, donor, params.cr, bounds, rng)))
    return trials


def test_preselect_first_promising_wins():
    b = simple_bounds()
    pop = population_from_arrays(
        [[0.1, 0.9, 2, 18], [0.4, 0.6, 8, 12], [0.7, 0.3, 14, 6],
         [0.9, 0.1, 18, 2], [0.2, 0.2, 4, 4]], b)
    params = MoeaParams(n=5, eval_budget=10, n_cand=3, seed=0)
    expected = collect_trials(pop, 1, params, b, seed=42)
    fake = FakeClassifier([-2, 3, 5])
    chosen = preselect_offspring(1, pop, fake, params, b,
                                 np.random.default_rng(42))
    assert chosen == expected[1]


def test_preselect_all_unpromising_takes_least_bad():
    b = simple_bounds()
    pop = population_from_arrays(
        [[0.1, 0.9, 2, 18], [0.4, 0.6, 8, 12], [0.7, 0.3, 14, 6],
         [0.9, 0.1, 18, 2], [0.2, 0.2, 4, 4]], b)
    params = MoeaParams(n=5, eval_budget=10, n_cand=3, seed=0)
    expected = collect_trials(pop, 2, params, b, seed=11)
    fake = FakeClassifier([-3, -1, -3])
    chosen = preselect_offspring(2, pop, fake, params, b,
                                 np.random.default_rng(11))
    assert chosen == expected[1]


def test_preselect_single_candidate_bypasses_classifier():
    b = simple_bounds()
    pop = population_from_arrays(
        [[0.1, 0.9, 2, 18], [0.4, 0.6, 8, 12], [0.7, 0.3, 14, 6],
         [0.9, 0.1, 18, 2]], b)
    params = MoeaParams(n=4, eval_budget=10, n_cand=1, seed=0)
    expected = collect_trials(pop, 0, params, b, seed=5)

    class Exploder:
        def score(self, x):
            raise AssertionError("classifier must not be called for n_cand=1")

    chosen = preselect_offspring(0, pop, Exploder(), params, b,
                                 np.random.default_rng(5))
    assert chosen == expected[0]


# --- environmental selection and archive ---------------------------------------

def test_selection_keeps_parents_when_offspring_dominated():
    parents = [ind(0, 3), ind(1, 2), ind(2, 1), ind(3, 0)]
    offspring = [ind(5, 5), ind(6, 6), ind(7, 7), ind(8, 8)]
    nxt = environmental_selection(parents, offspring)
    assert sorted(p.objectives.as_tuple() for p in nxt) == sorted(
        p.objectives.as_tuple() for p in parents)


def test_selection_exact_front_fit():
    parents = [ind(0, 3), ind(1, 2)]
    offspring = [ind(2, 1), ind(3, 0)]
    nxt = environmental_selection(parents, offspring)
    assert len(nxt) == 2
    assert all(p.rank == 1 for p in nxt)


def test_selection_truncates_by_crowding():
    # rank-1 set of size N+2: drop the two most crowded interior points
    n = 6
    parents = [ind(i, 8 - i) for i in range(0, 8, 2)]          # 4 spread points
    offspring = [ind(1.0, 6.9), ind(1.1, 6.8), ind(1.2, 6.7), ind(5, 9)]
    merged_rank1 = 7                                           # all but (5, 9)
    nxt = environmental_selection(parents[:3] + [ind(6, 0.5)],
                                  offspring[:3] + [ind(0.5, 9)])
    assert len(nxt) == 4
    objs = {p.objectives.as_tuple() for p in nxt}
    # boundary points always survive crowding truncation
    assert (0.5, 9.0) in objs or (0.0, 8.0) in objs
    assert (6.0, 0.5) in objs


def test_archive_rejects_dominated_insert():
    a = ParetoFront(cap=10)
    a.update([ind(1, 1)])
    before = [m.objectives.as_tuple() for m in a.members]
    a.update([ind(2, 2)])
    assert [m.objectives.as_tuple() for m in a.members] == before


def test_archive_dominating_insert_replaces():
    a = ParetoFront(cap=10)
    a.update([ind(1, 2), ind(2, 1)])
    a.update([ind(0.5, 0.5)])
    assert [m.objectives.as_tuple() for m in a.members] == [(0.5, 0.5)]


def test_archive_ignores_infeasible():
    a = ParetoFront(cap=10)
    a.update([ind(0.1, 0.1, vio=0.5)])
    assert len(a) == 0


def test_archive_crowding_truncation_keeps_extremes():
    rng = np.random.default_rng(0)
    a = ParetoFront(cap=100)
    pts = []
    for _ in range(150):
        x = float(rng.uniform(0, 1))
        pts.append(ind(x, 1 - x))
    a.update(pts)
    assert len(a) == 100
    objs = a.objectives()
    xs = [p.objectives.p_loss for p in pts]
    assert objs[:, 0].min() == pytest.approx(min(xs))
    assert objs[:, 0].max() == pytest.approx(max(xs))
    # mutual non-domination by O(n^2) scan
    for i, m in enumerate(a.members):
        for j, o in enumerate(a.members):
            if i != j:
                assert not dominates(m, o)


def test_archive_monotone_across_updates():
    rng = np.random.default_rng(4)
    a = ParetoFront(cap=500)
    for _ in range(20):
        batch = random_objective_individuals(rng, 30)
        old = list(a.members)
        update_archive(a, batch)
        for m in old:
            still_there = any(x.objectives.as_tuple() == m.objectives.as_tuple()
                              for x in a.members)
            dominated = any(dominates(x, m) for x in a.members)
            assert still_there or dominated


# --- full run ------------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_run(ieee30):
    params = MoeaParams(n=20, eval_budget=300, seed=9)
    return run(ieee30, params), params


def test_run_budget_accounting(tiny_run, ieee30):
    (front, report), params = tiny_run
    assert report.evaluations == 300
    assert report.generations == (300 - 20) // 20
    assert report.evaluations <= params.eval_budget + params.n


def test_run_zero_generations(ieee30):
    params = MoeaParams(n=20, eval_budget=20, seed=9)
    front, report = run(ieee30, params)
    assert report.generations == 0
    assert report.evaluations == 20
    assert all(m.rank == 1 for m in front.members)


def test_run_archive_nondominated_and_feasible(tiny_run):
    (front, report), _ = tiny_run
    for i, m in enumerate(front.members):
        assert m.feasible
        for j, o in enumerate(front.members):
            if i != j:
                assert not dominates(m, o)


def test_run_seeded_determinism(ieee30):
    params = MoeaParams(n=10, eval_budget=100, seed=33)
    f1, r1 = run(ieee30, params)
    f2, r2 = run(ieee30, params)
    assert np.array_equal(f1.objectives(), f2.objectives())
    assert [m.u for m in f1.members] == [m.u for m in f2.members]
    assert r1.trace == r2.trace


def test_run_jobs_match_serial(ieee30):
    params = MoeaParams(n=10, eval_budget=100, seed=33)
    f1, _ = run(ieee30, params, jobs=1)
    f2, _ = run(ieee30, params, jobs=3)
    assert np.array_equal(f1.objectives(), f2.objectives())


def test_params_validation():
    with pytest.raises(ValueError):
        MoeaParams(n=3)
    with pytest.raises(ValueError):
        MoeaParams(f=0.0)
    with pytest.raises(ValueError):
        MoeaParams(cr=1.5)
    with pytest.raises(ValueError):
        MoeaParams(k=4)
    with pytest.raises(ValueError):
        MoeaParams(n_cand=0)
