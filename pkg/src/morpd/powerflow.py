"""Newton-Raphson AC power flow and reactive-dispatch objective evaluation.

The solver works on the polar mismatch equations with a full Jacobian and a
flat start.  Everything downstream of :func:`solve` (loss, voltage deviation,
constraint screening) is a pure function of the returned solution, so a case
plus a control vector maps deterministically to an objective pair and a
violation report via :func:`evaluate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .network import PQ, PV, SLACK, ControlVector, NetworkCase, apply_controls

NR_TOLERANCE = 1e-6       # p.u. mismatch
NR_MAX_ITER = 30
NONCONVERGENCE_PENALTY = 1e6


@dataclass(frozen=True)
class AdmittanceMatrix:
    """Bus admittance matrix plus the per-branch pi-model terms.

    ``matrix`` is the complex bus admittance matrix (sparse CSR).  The four
    branch-term arrays give the 2x2 admittance block of each branch in the
    internal bus ordering, with off-nominal taps already folded in on the
    from side; they are what branch flows are computed from.
    """

    matrix: sp.csr_matrix
    f: np.ndarray          # internal from-bus index per branch
    t: np.ndarray          # internal to-bus index per branch
    yff: np.ndarray
    yft: np.ndarray
    ytf: np.ndarray
    ytt: np.ndarray

    def g(self, i: int, j: int) -> float:
        """Transfer conductance between internal bus indices i and j."""
        return float(self.matrix[i, j].real)

    def b(self, i: int, j: int) -> float:
        """Transfer susceptance between internal bus indices i and j."""
        return float(self.matrix[i, j].imag)


@dataclass(frozen=True)
class PowerFlowSolution:
    v: np.ndarray            # p.u. magnitude per bus
    theta: np.ndarray        # radians per bus
    q_gen: np.ndarray        # Mvar per generator (case order)
    p_slack: float           # MW produced at the slack bus
    s_from: np.ndarray       # MVA apparent flow at each branch from end
    s_to: np.ndarray         # MVA apparent flow at each branch to end
    p_from: np.ndarray       # MW active flow into each branch from end
    p_to: np.ndarray         # MW active flow into each branch to end
    converged: bool
    iterations: int          # mismatch evaluations (1 = converged at start)
    max_mismatch: float      # p.u.


@dataclass(frozen=True)
class ObjectivePair:
    p_loss: float            # MW
    vd: float                # dimensionless

    def as_tuple(self) -> tuple[float, float]:
        return (self.p_loss, self.vd)


@dataclass(frozen=True)
class ViolationReport:
    q_gen: float             # normalized generator reactive excess
    voltage: float           # normalized load-voltage excess
    branch: float            # normalized branch-loading excess
    non_convergence: bool
    total: float

    @property
    def feasible(self) -> bool:
        return self.total == 0.0


def build_ybus(case: NetworkCase) -> AdmittanceMatrix:
    """Assemble the bus admittance matrix for ``case``.

    Standard pi model; transformer taps act on the from side; switchable
    capacitor banks and fixed bus shunts contribute to the diagonal.
    """
    idx = case.bus_index()
    n = case.n_bus
    nbr = len(case.branches)

    f = np.array([idx[br.from_bus] for br in case.branches], dtype=int)
    t = np.array([idx[br.to_bus] for br in case.branches], dtype=int)
    z = np.array([complex(br.r, br.x) for br in case.branches])
    if np.any(z == 0):
        raise ValueError("branch with zero series impedance")
    ys = 1.0 / z
    bc = np.array([br.b_charging for br in case.branches])
    tap = np.array([br.tap for br in case.branches])

    yff = (ys + 0.5j * bc) / tap**2
    yft = -ys / tap
    ytf = -ys / tap
    ytt = ys + 0.5j * bc

    ysh = np.zeros(n, dtype=complex)
    for b in case.buses:
        ysh[idx[b.id]] += 1j * b.b_shunt
    for s in case.shunts:
        ysh[idx[s.bus]] += 1j * (s.banks_on * s.mvar_per_bank) / case.base_mva

    rows = np.concatenate([f, f, t, t, np.arange(n)])
    cols = np.concatenate([f, t, f, t, np.arange(n)])
    vals = np.concatenate([yff, yft, ytf, ytt, ysh])
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    matrix.sum_duplicates()

    return AdmittanceMatrix(matrix=matrix, f=f, t=t, yff=yff, yft=yft, ytf=ytf, ytt=ytt)


def solve(case: NetworkCase, tol: float = NR_TOLERANCE,
          max_iter: int = NR_MAX_ITER) -> PowerFlowSolution:
    """Run a Newton-Raphson power flow from a flat start.

    PV and slack magnitudes are pinned to the generator setpoints; PQ
    magnitudes start at 1.0 p.u. and all angles at the slack angle (0).
    Convergence requires max |P, Q mismatch| <= ``tol`` p.u.  A singular
    Jacobian or hitting ``max_iter`` returns a non-converged solution
    instead of raising.
    """
    idx = case.bus_index()
    n = case.n_bus
    ybus = build_ybus(case)
    Y = np.asarray(ybus.matrix.todense())

    kinds = np.array([b.kind for b in case.buses])
    slack = int(np.flatnonzero(kinds == SLACK)[0])
    pv = np.flatnonzero(kinds == PV)
    pq = np.flatnonzero(kinds == PQ)
    pvpq = np.concatenate([pv, pq])

    # net specified injections, p.u.
    p_spec = np.array([-b.p_load for b in case.buses]) / case.base_mva
    q_spec = np.array([-b.q_load for b in case.buses]) / case.base_mva
    vm = np.ones(n)
    for g in case.generators:
        i = idx[g.bus]
        vm[i] = g.v_set
        p_spec[i] += g.p_gen / case.base_mva

    va = np.zeros(n)
    V = vm * np.exp(1j * va)

    npv, npq = pv.size, pq.size
    converged = False
    singular = False
    iterations = 0
    max_mismatch = math.inf

    for _ in range(max_iter + 1):
        Ibus = Y @ V
        S = V * np.conj(Ibus)
        mis_p = S.real - p_spec
        mis_q = S.imag - q_spec
        F = np.concatenate([mis_p[pvpq], mis_q[pq]])
        iterations += 1
        max_mismatch = float(np.max(np.abs(F))) if F.size else 0.0
        if max_mismatch <= tol:
            converged = True
            break
        if iterations > max_iter:
            break

        # dS/dVa = j diag(V) conj(diag(I) - Y diag(V)) and the magnitude
        # counterpart, written elementwise to stay O(n^2)
        vnorm = V / np.abs(V)
        YV = Y * V[None, :]
        dS_dVa = 1j * V[:, None] * np.conj(np.diag(Ibus) - YV)
        dS_dVm = V[:, None] * np.conj(Y * vnorm[None, :])
        dS_dVm[np.diag_indices_from(dS_dVm)] += np.conj(Ibus) * vnorm

        J = np.empty((npv + 2 * npq, npv + 2 * npq))
        J[: npv + npq, : npv + npq] = dS_dVa[np.ix_(pvpq, pvpq)].real
        J[: npv + npq, npv + npq:] = dS_dVm[np.ix_(pvpq, pq)].real
        J[npv + npq:, : npv + npq] = dS_dVa[np.ix_(pq, pvpq)].imag
        J[npv + npq:, npv + npq:] = dS_dVm[np.ix_(pq, pq)].imag

        try:
            dx = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            singular = True
            break
        if not np.all(np.isfinite(dx)):
            singular = True
            break

        va[pvpq] -= dx[: npv + npq]
        vm[pq] -= dx[npv + npq:]
        V = vm * np.exp(1j * va)

    if singular:
        converged = False

    Ibus = Y @ V
    S = V * np.conj(Ibus)

    q_gen = np.empty(len(case.generators))
    for k, g in enumerate(case.generators):
        i = idx[g.bus]
        q_gen[k] = S[i].imag * case.base_mva + case.buses[i].q_load
    p_slack = S[slack].real * case.base_mva + case.buses[slack].p_load

    vf, vt = V[ybus.f], V[ybus.t]
    flow_from = vf * np.conj(ybus.yff * vf + ybus.yft * vt) * case.base_mva
    flow_to = vt * np.conj(ybus.ytf * vf + ybus.ytt * vt) * case.base_mva

    return PowerFlowSolution(
        v=vm.copy(), theta=va.copy(), q_gen=q_gen, p_slack=float(p_slack),
        s_from=np.abs(flow_from), s_to=np.abs(flow_to),
        p_from=flow_from.real, p_to=flow_to.real, converged=converged,
        iterations=iterations, max_mismatch=max_mismatch,
    )


def active_power_loss(sol: PowerFlowSolution, case: NetworkCase) -> float:
    """Total branch active loss in MW.

    Sum of the active power entering every branch from both ends, which
    equals total generation minus total load and reduces to the conductance
    form g_k (Vi^2 + Vj^2 - 2 Vi Vj cos(di - dj)) on branches at nominal
    tap.
    """
    if not sol.converged:
        raise ValueError("active_power_loss requires a converged solution")
    return float(np.sum(sol.p_from + sol.p_to))


def voltage_deviation(sol: PowerFlowSolution, case: NetworkCase,
                      v_ref: float = 1.0) -> float:
    """Sum of |V - v_ref| / (v_max - v_min) over the load (PQ) buses."""
    if not sol.converged:
        raise ValueError("voltage_deviation requires a converged solution")
    total = 0.0
    for i, b in enumerate(case.buses):
        if b.kind == PQ:
            total += abs(sol.v[i] - v_ref) / (b.v_max - b.v_min)
    return total


def constraint_violation(sol: PowerFlowSolution, case: NetworkCase) -> ViolationReport:
    """Normalized dependent-variable constraint excess.

    Sums, each scaled by its own allowable range: generator reactive output
    outside [q_min, q_max], load-bus voltage outside its band, and branch
    loading above the MVA rating (worst end).  A non-converged solution gets
    a fixed large sentinel total instead.
    """
    if not sol.converged:
        return ViolationReport(q_gen=0.0, voltage=0.0, branch=0.0,
                               non_convergence=True, total=NONCONVERGENCE_PENALTY)

    q_term = 0.0
    for k, g in enumerate(case.generators):
        q = sol.q_gen[k]
        q_term += max(0.0, q - g.q_max, g.q_min - q) / (g.q_max - g.q_min)

    v_term = 0.0
    for i, b in enumerate(case.buses):
        if b.kind == PQ:
            v = sol.v[i]
            v_term += max(0.0, v - b.v_max, b.v_min - v) / (b.v_max - b.v_min)

    s_term = 0.0
    for k, br in enumerate(case.branches):
        if br.s_max > 0:
            s = max(sol.s_from[k], sol.s_to[k])
            s_term += max(0.0, s - br.s_max) / br.s_max

    return ViolationReport(q_gen=q_term, voltage=v_term, branch=s_term,
                           non_convergence=False, total=q_term + v_term + s_term)


def evaluate(case: NetworkCase, u: ControlVector) -> tuple[ObjectivePair, ViolationReport]:
    """Apply controls, solve, and score both objectives plus violations.

    This is the single real function evaluation of the optimizer.  Power
    flow failure never raises: the objectives degrade to +inf and the
    violation report carries the non-convergence sentinel.
    """
    controlled = apply_controls(case, u)
    sol = solve(controlled)
    if not sol.converged:
        return (ObjectivePair(math.inf, math.inf),
                constraint_violation(sol, controlled))
    obj = ObjectivePair(
        p_loss=active_power_loss(sol, controlled),
        vd=voltage_deviation(sol, controlled),
    )
    return obj, constraint_violation(sol, controlled)
