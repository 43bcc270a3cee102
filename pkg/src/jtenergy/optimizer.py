"""Power scaling (POLO), association growth (AOLO), their alternation (PALO)
and the non-JT full-load power baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq, root

from . import kernels
from .coupling import (CONVERGED, DIVERGED, EXCEEDED, FEASIBILITY_SLACK, SolverError,
                       SolverOptions, _report, energy, fixed_point_load, is_feasible,
                       received_power, scaled_demand)
from .model import Association, NetworkInstance, check_power

ROW_MAJOR = "row-major"
DESCENDING_GAIN = "descending-gain"


class ContractViolation(ValueError):
    """An optimizer was called with inputs that break its precondition."""


class InfeasibleDemandError(ValueError):
    """Demand cannot be met within the power caps.  ``cell`` names the violating cell."""

    def __init__(self, message: str, cell: int):
        super().__init__(message)
        self.cell = cell


class RoundCapExceeded(RuntimeError):
    def __init__(self, message: str, trace: "OptimizerTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class PoloOptions:
    epsilon: float = 1e-6
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("polo.epsilon must be > 0")


@dataclass(frozen=True)
class AoloOptions:
    tau: int = 3
    candidate_order: str = ROW_MAJOR
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("aolo.tau must be >= 1")
        if self.candidate_order not in (ROW_MAJOR, DESCENDING_GAIN):
            raise ValueError(f"aolo.candidate_order must be {ROW_MAJOR!r} or {DESCENDING_GAIN!r}")


@dataclass
class SolveStats:
    """Work counters accumulated by the optimizers."""

    fixed_point_solves: int = 0
    fixed_point_iterations: int = 0
    probes: int = 0
    links_added: int = 0

    def add(self, other: "SolveStats"):
        self.fixed_point_solves += other.fixed_point_solves
        self.fixed_point_iterations += other.fixed_point_iterations
        self.probes += other.probes
        self.links_added += other.links_added


@dataclass(frozen=True)
class RoundRecord:
    energy_after_polo: float
    energy: float
    max_load: float
    beta: float
    links_added: int
    fixed_point_solves: int
    fixed_point_iterations: int
    probes: int


@dataclass
class OptimizerTrace:
    initial_energy: float
    rounds: List[RoundRecord] = field(default_factory=list)

    @property
    def energies(self) -> List[float]:
        """Energy before the first round followed by the energy after each round."""
        return [self.initial_energy] + [r.energy for r in self.rounds]

    @property
    def fixed_point_solves(self) -> int:
        return sum(r.fixed_point_solves for r in self.rounds)

    @property
    def probes(self) -> int:
        return sum(r.probes for r in self.rounds)


def polo(inst: NetworkInstance, assoc: Association, p, x, opts: PoloOptions = PoloOptions(),
         stats: Optional[SolveStats] = None):
    """Scale all powers down by the largest common factor keeping every load <= 1.

    Bisection on the factor ``beta`` in (0, 1].  Each trial solves the load
    fixed point at ``beta * p``, warm-started from the load at the current
    upper bracket so the trajectory is monotone and an overload is detected
    as soon as it appears.  Stops when successive trial powers are within
    ``opts.epsilon`` (euclidean norm) and returns the last feasible pair.

    Returns
    -------
    (p_new, x_new)
    """
    p = check_power(inst, p)
    x = np.asarray(x, dtype=np.float64)
    if not is_feasible(x):
        raise ContractViolation(f"POLO input load is infeasible (max {x.max():.6g})")
    if stats is None:
        stats = SolveStats()
    lo, hi = 0.0, 1.0
    best_p, best_x = p, x
    p_prev = p  # the beta = 1 candidate
    while True:
        beta = 0.5 * (lo + hi)
        p_trial = beta * p
        rep = fixed_point_load(inst, assoc, p_trial, best_x, opts.solver,
                               stop_above=1.0 + FEASIBILITY_SLACK)
        stats.fixed_point_solves += 1
        stats.fixed_point_iterations += rep.iterations
        if rep.status in (EXCEEDED, DIVERGED) or (rep.converged and not is_feasible(rep.load)):
            lo = beta
        elif rep.converged:
            hi = beta
            best_p, best_x = p_trial, np.array(rep.load)
        else:
            raise SolverError(f"POLO fixed point at beta={beta:.12g} did not converge", rep)
        if np.linalg.norm(p_trial - p_prev) <= opts.epsilon:
            return best_p, best_x
        p_prev = p_trial


def jt_link_test(inst: NetworkInstance, assoc: Association, p, x, cell: int, ue: int,
                 tau: int = 3):
    """Sufficient test that serving ``ue`` also from ``cell`` lowers every cell load.

    Iterates the load map with the enlarged association on the SINR side and
    the current one on the load side, for at most ``tau`` rounds starting
    from ``x``.  Accepts at the first round where the new load of ``cell``
    (enlarged association) does not exceed its probed load.

    Returns
    -------
    (accepted, probe_load)
    """
    if assoc.kappa[cell, ue]:
        raise ContractViolation(f"cell {cell} already serves UE {ue}")
    if tau < 1:
        raise ValueError("tau must be >= 1")
    k, xk = kernels.link_probe(received_power(inst, p), np.ascontiguousarray(assoc.kappa),
                               scaled_demand(inst), inst.noise_power,
                               np.ascontiguousarray(x, dtype=np.float64), cell, ue, tau)
    return k > 0, xk


def _candidates(inst: NetworkInstance, kappa: np.ndarray, order: str):
    cells, ues = np.nonzero(kappa == 0)  # row-major
    if order == DESCENDING_GAIN:
        idx = np.argsort(-inst.gain[cells, ues], kind="stable")
        cells, ues = cells[idx], ues[idx]
    return list(zip(cells.tolist(), ues.tolist()))


def aolo(inst: NetworkInstance, assoc: Association, p, x, opts: AoloOptions = AoloOptions(),
         stats: Optional[SolveStats] = None):
    """Add JT links that provably reduce the network load, at fixed power.

    Every cell-UE pair without a link is probed once, in ``opts.candidate_order``.
    An accepted link is kept, the fixed point is re-solved under the grown
    association, and later probes start from that new load.

    Returns
    -------
    (Association, x_new)
    """
    if stats is None:
        stats = SolveStats()
    p = check_power(inst, p)
    kappa = np.array(assoc.kappa, dtype=np.uint8, order="C")
    A = received_power(inst, p)
    ds = scaled_demand(inst)
    x = np.array(x, dtype=np.float64)
    if not is_feasible(x):
        raise ContractViolation(f"AOLO input load is infeasible (max {x.max():.6g})")
    sopt = opts.solver
    for c, u in _candidates(inst, kappa, opts.candidate_order):
        k, _ = kernels.link_probe(A, kappa, ds, inst.noise_power, x, c, u, opts.tau)
        stats.probes += 1
        if not k:
            continue
        kappa[c, u] = 1
        rep = _report(*kernels.fixed_point(
            A, kappa, ds, inst.noise_power, x, sopt.tolerance, sopt.max_iterations,
            sopt.divergence_ceiling, 0.0))
        stats.fixed_point_solves += 1
        stats.fixed_point_iterations += rep.iterations
        stats.links_added += 1
        if not rep.converged:
            raise SolverError(f"AOLO re-solve after adding link ({c}, {u}) did not converge", rep)
        x = np.array(rep.load)
    return Association(kappa), x


def palo(inst: NetworkInstance, assoc: Association, p, x,
         polo_opts: PoloOptions = PoloOptions(), aolo_opts: AoloOptions = AoloOptions(),
         round_cap: Optional[int] = None):
    """Alternate POLO and AOLO until AOLO adds no link.

    Returns
    -------
    (p, Association, x, OptimizerTrace)
    """
    p = check_power(inst, p)
    x = np.asarray(x, dtype=np.float64)
    cap = round_cap if round_cap is not None else 100 * inst.n_cells * inst.n_ues
    trace = OptimizerTrace(initial_energy=energy(p, x))
    for _ in range(cap):
        stats = SolveStats()
        p1, x1 = polo(inst, assoc, p, x, polo_opts, stats)
        e1 = energy(p1, x1)
        assoc2, x2 = aolo(inst, assoc, p1, x1, aolo_opts, stats)
        trace.rounds.append(RoundRecord(
            energy_after_polo=e1,
            energy=energy(p1, x2),
            max_load=float(np.max(x2)),
            beta=float(np.max(p1 / p)),
            links_added=stats.links_added,
            fixed_point_solves=stats.fixed_point_solves,
            fixed_point_iterations=stats.fixed_point_iterations,
            probes=stats.probes,
        ))
        p, x = p1, x2
        if assoc2 == assoc:
            return p, assoc, x, trace
        assoc = assoc2
    raise RoundCapExceeded(f"PALO did not terminate within {cap} rounds", trace)


def _cell_power_for_full_load(g, interference, ds) -> float:
    """Smallest power making ``sum ds / log2(1 + p g / I)`` equal to 1."""
    a = g / interference
    if a.size == 1:
        return float(math.expm1(math.log(2.0) * ds[0]) / a[0])
    # each term alone <= 1 gives a lower bracket, each term <= 1/|J| an upper one
    lo = float(np.max(np.expm1(np.log(2.0) * ds) / a))
    with np.errstate(over="ignore"):
        hi = float(np.max(np.expm1(np.log(2.0) * ds * a.size) / a))
    if not np.isfinite(hi):
        return math.inf

    def excess(pw):
        return float(np.sum(ds / np.log2(1.0 + pw * a))) - 1.0

    if excess(hi) >= 0.0:
        return hi
    if excess(lo) <= 0.0:
        return lo
    return brentq(excess, lo, hi, xtol=lo * 1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)


_POLISH_AFTER = 200


def _polish_full_load_power(full_load_power, p, active, tol):
    """Solve ``full_load_power(p) = p`` on the active cells with a hybrid Newton method."""
    idx = np.flatnonzero(active)
    scale = p[idx].copy()

    def resid(z):
        q = p.copy()
        q[idx] = np.maximum(z, 0.0) * scale  # trial steps may leave the positive orthant
        return full_load_power(q)[idx] / scale - z

    try:
        sol = root(resid, np.ones(idx.size), method="hybr", options={"xtol": 1e-14})
    except ValueError:
        return None
    q = p.copy()
    q[idx] = sol.x * scale
    if not (np.all(np.isfinite(q)) and np.all(q[idx] > 0)):
        return None
    if np.max(np.abs(full_load_power(q) - q)) > tol * float(np.max(q)):
        return None
    return q


def nonjt_fullload_power(inst: NetworkInstance, assoc: Association,
                         solver: SolverOptions = SolverOptions()):
    """Per-RU powers that put every serving cell at exactly full load, without JT.

    Power-domain fixed-point iteration starting from zero power: each cell's
    power is set to the value giving load 1 against the interference of the
    other active cells at full load.  From zero the iterates are
    non-decreasing, so passing a power cap proves the demand infeasible.
    Cells that serve no UE carry zero load and are assigned their cap.

    Returns
    -------
    (p, x)
    """
    if not assoc.is_single_serving:
        raise ContractViolation("non-JT baseline needs exactly one serving cell per UE")
    n, m = inst.gain.shape
    serving = np.argmax(assoc.kappa, axis=0)
    active = assoc.kappa.sum(axis=1) > 0
    ds = scaled_demand(inst)
    members = [np.flatnonzero(serving == i) for i in range(n)]
    cols = np.arange(m)
    weight = active.astype(np.float64)
    # loads at the result must sit within FEASIBILITY_SLACK of 1
    tol = min(solver.tolerance, 1e-12)

    def full_load_power(p):
        rx = p[:, None] * inst.gain
        interference = weight @ rx - rx[serving, cols] + inst.noise_power
        out = np.zeros(n)
        for i in np.flatnonzero(active):
            J = members[i]
            out[i] = _cell_power_for_full_load(inst.gain[i, J], interference[J], ds[J])
        return out

    def check_caps(p):
        over = np.flatnonzero(p > inst.power_max * (1.0 + 1e-12))
        if over.size:
            bad = int(over[np.argmax(p[over] / inst.power_max[over])])
            raise InfeasibleDemandError(
                f"cell {bad} needs more than its power cap "
                f"({inst.power_max[bad]:.6g} W/RU) to serve its demand at full load", bad)

    p = np.zeros(n)
    for it in range(1, solver.max_iterations + 1):
        p_new = full_load_power(p)
        check_caps(p_new)
        step = float(np.max(np.abs(p_new - p)))
        p = p_new
        if step <= tol * float(np.max(p)):
            break
        if it == _POLISH_AFTER:
            # near the capacity edge the iteration contracts slowly; the fixed
            # point is unique, so a root finder started here lands on it
            q = _polish_full_load_power(full_load_power, p, active, tol)
            if q is not None:
                check_caps(q)
                p = q
                break
    else:
        raise SolverError("non-JT power iteration did not converge",
                          fixed_point_load(inst, assoc, np.where(active, p, inst.power_max),
                                           weight, solver))
    p = np.where(active, p, inst.power_max)
    rep = fixed_point_load(inst, assoc, p, weight, solver)
    if rep.status != CONVERGED:
        raise SolverError("load re-solve at the non-JT power did not converge", rep)
    return p, np.array(rep.load)
