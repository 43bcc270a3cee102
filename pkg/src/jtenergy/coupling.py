"""SINR and load functions and the load-coupling fixed-point solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import Association, NetworkInstance

CONVERGED = "converged"
DIVERGED = "diverged"
ITERATION_CAP = "iteration-cap"
EXCEEDED = "exceeded"

_STATUS = {
    kernels.STATUS_CONVERGED: CONVERGED,
    kernels.STATUS_DIVERGED: DIVERGED,
    kernels.STATUS_ITERATION_CAP: ITERATION_CAP,
    kernels.STATUS_EXCEEDED: EXCEEDED,
}

#: Loads up to ``1 + FEASIBILITY_SLACK`` count as within the full-load constraint.
FEASIBILITY_SLACK = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-9
    max_iterations: int = 10000
    divergence_ceiling: float = 1e6

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("solver.tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("solver.max_iterations must be >= 1")
        if not self.divergence_ceiling > 0:
            raise ValueError("solver.divergence_ceiling must be > 0")


@dataclass(frozen=True, eq=False)
class FixedPointReport:
    """Outcome of one fixed-point solve.

    ``status`` is one of ``converged``, ``diverged``, ``iteration-cap`` or
    ``exceeded``.  The last one only occurs when the caller asked the solver
    to stop once a monotonically increasing trajectory crossed a threshold;
    the true fixed point then lies above that threshold.
    """

    load: np.ndarray
    iterations: int
    status: str
    residual: float

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


class SolverError(RuntimeError):
    """A fixed-point solve ended without converging where convergence was required."""

    def __init__(self, message: str, report: FixedPointReport):
        super().__init__(message)
        self.report = report


def _report(x, iters, status, residual) -> FixedPointReport:
    x.setflags(write=False)
    return FixedPointReport(load=x, iterations=iters, status=_STATUS[status], residual=residual)


def received_power(inst: NetworkInstance, p) -> np.ndarray:
    """``A[i, j] = p_i g_ij`` as a C-contiguous matrix for the kernels."""
    return np.ascontiguousarray(np.asarray(p, dtype=np.float64)[:, None] * inst.gain)


def scaled_demand(inst: NetworkInstance) -> np.ndarray:
    return np.ascontiguousarray(inst.demand_min / inst.capacity_scale)


def _kappa(assoc: Association) -> np.ndarray:
    return np.ascontiguousarray(assoc.kappa, dtype=np.uint8)


def sinr(inst: NetworkInstance, assoc: Association, p, x) -> np.ndarray:
    """Per-UE SINR: serving powers over load-weighted interference plus noise."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    return kernels.sinr(received_power(inst, p), _kappa(assoc), inst.noise_power, x)


def cell_load(inst: NetworkInstance, assoc: Association, gamma) -> np.ndarray:
    """Per-cell load ``sum_j d_j / (M B log2(1 + gamma_j))`` over served UEs.

    Not clamped to 1; see :func:`is_feasible`.
    """
    y = scaled_demand(inst) / np.log2(1.0 + np.asarray(gamma, dtype=np.float64))
    return assoc.kappa.astype(np.float64) @ y


def load_map(inst: NetworkInstance, assoc: Association, p, x) -> np.ndarray:
    """One application of ``x -> f(h(x))``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    return kernels.load_map(received_power(inst, p), _kappa(assoc), scaled_demand(inst),
                            inst.noise_power, x)


def fixed_point_load(inst: NetworkInstance, assoc: Association, p, x0=None,
                     opts: SolverOptions = SolverOptions(), stop_above: float = 0.0
                     ) -> FixedPointReport:
    """Solve ``x = f(h(x, p, kappa))`` by plain fixed-point iteration from ``x0``.

    Parameters
    ----------
    x0 : array, optional
        Starting load; defaults to zeros.  Any non-negative start reaches
        the same fixed point when one exists.
    stop_above : float
        If positive, stop early with status ``exceeded`` once a
        non-decreasing trajectory has some entry above this value.
    """
    if x0 is None:
        x0 = np.zeros(inst.n_cells)
    x0 = np.asarray(x0, dtype=np.float64)
    if np.any(x0 < 0):
        raise ValueError("x0 must be non-negative")
    x, iters, status, residual = kernels.fixed_point(
        received_power(inst, p), _kappa(assoc), scaled_demand(inst), inst.noise_power,
        np.ascontiguousarray(x0), opts.tolerance, opts.max_iterations,
        opts.divergence_ceiling, stop_above)
    return _report(x, iters, status, residual)


def solve_or_raise(inst, assoc, p, x0=None, opts: SolverOptions = SolverOptions()) -> FixedPointReport:
    rep = fixed_point_load(inst, assoc, p, x0, opts)
    if not rep.converged:
        raise SolverError(f"fixed-point solve ended with status {rep.status} "
                          f"after {rep.iterations} iterations", rep)
    return rep


def energy(p, x) -> float:
    """Transmission energy ``p . x`` (per-RU power times load, summed over cells)."""
    return float(np.dot(np.asarray(p, dtype=np.float64), np.asarray(x, dtype=np.float64)))


def is_feasible(x, slack: float = FEASIBILITY_SLACK) -> bool:
    x = np.asarray(x, dtype=np.float64)
    return bool(x.size == 0 or x.max() <= 1.0 + slack)
