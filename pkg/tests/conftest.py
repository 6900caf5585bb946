import numpy as np
import pytest

from morpd import load_bundled_case
from morpd.network import ControlVector


@pytest.fixture(scope="session")
def ieee30():
    return load_bundled_case("ieee30")


@pytest.fixture(scope="session")
def ieee118():
    return load_bundled_case("ieee118")


def control_vector(vg, tap_ratios, shunt_mvar, t_min=0.90, step=0.01):
    """Build a ControlVector from physical tap ratios and Mvar counts."""
    taps = tuple(int(round((t - t_min) / step)) for t in tap_ratios)
    return ControlVector(gen_v=tuple(vg), tap_steps=taps,
                         shunt_banks=tuple(int(q) for q in shunt_mvar))


# Published operating points used across the suite: the pre-optimization
# base case and the two compromise solutions of the reference study.
INITIAL_CONTROLS = control_vector(
    [1.060, 1.043, 1.010, 1.010, 1.082, 1.071], [0.98, 0.97, 0.93, 0.97], [5, 19, 4])
BCS1_CONTROLS = control_vector(
    [1.1000, 1.0778, 1.0417, 1.0478, 1.0393, 1.0293], [1.05, 1.05, 1.05, 1.00], [12, 20, 12])
BCS2_CONTROLS = control_vector(
    [1.0836, 1.0530, 1.0070, 1.0065, 0.9923, 1.0234], [1.01, 0.95, 0.98, 0.96], [1, 16, 14])

INITIAL_TARGET = (17.46, 6.38)
BCS1_TARGET = (16.17, 3.93)
BCS2_TARGET = (17.20, 1.76)


def assert_close_pct(value, target, pct):
    assert abs(value - target) <= pct * abs(target), (
        f"{value} not within {100 * pct}% of {target}"
    )


def random_objective_individuals(rng, n, infeasible_fraction=0.0, duplicates=False):
    """Random evaluated individuals for sorting/selection tests."""
    from morpd.moea import Individual
    from morpd.powerflow import ObjectivePair

    pop = []
    for _ in range(n):
        obj = ObjectivePair(float(rng.uniform(0, 10)), float(rng.uniform(0, 10)))
        vio = float(rng.uniform(0.1, 5.0)) if rng.random() < infeasible_fraction else 0.0
        pop.append(Individual(u=None, objectives=obj, violation=vio))
    if duplicates and n >= 4:
        pop[1] = Individual(u=None, objectives=pop[0].objectives,
                            violation=pop[0].violation)
        pop[3] = Individual(u=None, objectives=pop[2].objectives,
                            violation=pop[2].violation)
    return pop
