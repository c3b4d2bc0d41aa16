"""
base.py

Types and machinery shared by the four power-allocation schemes: the
decision vector, the robustness models, the allocator configuration, the
iteration trace, per-UAV link terms, and the alternating-optimization
driver used by S-AO and CVaR-AO.
"""

import os
from dataclasses import dataclass, field
from math import pi
from typing import Callable, Optional, Sequence, Tuple, Union

import cvxpy as cp
import numpy as np
from tqdm import trange

from ..channel import beam_gain
from ..conic import NUMERICAL_FAILURE, ConicProblem, SolveReport, solve
from ..errors import BudgetInfeasibleError, InfeasibleError, NumericalFailureError
from ..fisher import crb, fim_basis
from ..geometry import Scenario

# subproblems see P_total shrunk by this fraction so solver tolerance never breaches the budget
BUDGET_MARGIN = 1e-7
# relative slack under which a larger objective still counts as no increase
DESCENT_SLACK = 1e-10


######################################
# Decision variables and models
######################################


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """
    Per-UAV sensing and communication powers in W.

    Arguments:
        - sensing: Array of shape `(K,)`, P_s.
        - comm: Array of shape `(K,)`, P_c.
    """
    sensing: np.ndarray
    comm: np.ndarray

    def __post_init__(self):
        if self.sensing.shape != self.comm.shape:
            raise ValueError("sensing and comm powers must have the same length")
        if (self.sensing < 0).any() or (self.comm < 0).any():
            raise ValueError("powers must be non-negative")

    @property
    def total(self) -> float:
        return float(self.sensing.sum() + self.comm.sum())


@dataclass(frozen=True)
class Ellipsoid:
    """LSE bounded by du^T J_p du <= delta."""
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class Gaussian:
    """LSE ~ N(0, J_p^{-1}); the rate floor may fail with probability p_out."""
    p_out: float

    def __post_init__(self):
        if not 0 < self.p_out < 1:
            raise ValueError(f"p_out must lie in (0, 1), got {self.p_out}")


@dataclass(frozen=True)
class ArbitraryMoments:
    """Any LSE distribution with mean 0 and covariance J_p^{-1}; outage at most p_out."""
    p_out: float

    def __post_init__(self):
        if not 0 < self.p_out < 1:
            raise ValueError(f"p_out must lie in (0, 1), got {self.p_out}")


RobustnessModel = Union[Ellipsoid, Gaussian, ArbitraryMoments]


@dataclass(frozen=True)
class AllocatorConfig:
    """
    Inputs of the allocation algorithms.

    Arguments:
        - rate_floor: R_bar, bits/s/Hz.
        - total_power: P_total, W.
        - tolerance: Stop once tr(J_p^{-1}) decreases by less than this (m^2).
        - max_iters: N_max.
        - initial_sensing: P_s^(0) of shape `(K,)`; None means P_total / (2K) each.
        - solver_tol: Residual tolerance of every conic solve.
        - left_grouping: Use the one-sided J0^{-2}(J - J0) and D0^2(X - X0) linearizations.
        - freeze_linearization: CVaR-AO keeps D0 at P_s^(0) instead of the previous iterate.
        - show_pbar: Show a progress bar over the outer iterations.
        - dump_dir: Write every subproblem there in SDPA format.
    """
    rate_floor: float
    total_power: float
    tolerance: float = 1e-5
    max_iters: int = 30
    initial_sensing: Optional[Sequence[float]] = None
    solver_tol: float = 1e-7
    left_grouping: bool = False
    freeze_linearization: bool = False
    show_pbar: bool = False
    dump_dir: Optional[str] = None

    def __post_init__(self):
        if not self.rate_floor > 0:
            raise ValueError(f"rate_floor must be positive, got {self.rate_floor}")
        if not self.total_power > 0:
            raise ValueError(f"total_power must be positive, got {self.total_power}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.initial_sensing is not None and min(self.initial_sensing) <= 0:
            raise ValueError("initial_sensing entries must be positive")

    @property
    def budget(self) -> float:
        return self.total_power * (1 - BUDGET_MARGIN)

    def start(self, num_uavs: int) -> np.ndarray:
        if self.initial_sensing is None:
            return np.full(num_uavs, self.total_power / (2 * num_uavs))
        start = np.asarray(self.initial_sensing, dtype=np.float64)
        if start.shape != (num_uavs,):
            raise ValueError(f"initial_sensing needs {num_uavs} entries, got {start.shape[0]}")
        return start


######################################
# Iteration trace
######################################


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    sensing: np.ndarray
    comm: np.ndarray
    aux: dict
    statuses: Tuple[str, ...]


@dataclass
class IterationTrace:
    """Accepted iterates of one allocator run and why the run stopped."""
    scheme: str
    records: list = field(default_factory=list)
    stop_reason: str = ""

    def append(self, iteration, objective, allocation: PowerAllocation, aux: dict, statuses) -> None:
        self.records.append(IterationRecord(
            iteration=iteration,
            objective=float(objective),
            sensing=allocation.sensing.copy(),
            comm=allocation.comm.copy(),
            aux=aux,
            statuses=tuple(statuses),
        ))

    @property
    def objectives(self) -> list:
        return [r.objective for r in self.records]

    @property
    def iterations(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)


######################################
# Link terms
######################################


def gamma(scenario: Scenario, k: int, rate_floor: float) -> float:
    """
    gamma_k = lambda^2 |a_k^H w_k|^2 / (16 pi^2 N_0 (2^R_bar - 1)), so that the
    rate floor holds iff ||u_hat + du - p_k||^2 <= gamma_k P_c.
    """
    if not rate_floor > 0:
        raise ValueError(f"rate_floor must be positive, got {rate_floor}")
    return (scenario.wavelength ** 2 * beam_gain(scenario, k)
            / (16 * pi ** 2 * scenario.noise_psd * (2.0 ** rate_floor - 1)))


@dataclass(frozen=True, eq=False)
class SystemTerms:
    """
    Per-UAV constants of the allocation problems.

    Arguments:
        - offsets: `(K, 3)`, u_hat - p_k.
        - distance_sq: `(K,)`, ||u_hat - p_k||^2.
        - gamma: `(K,)`, see `gamma`.
        - basis: `(K, 3, 3)`, per-watt FIM terms, J_p = sum_k P_{s,k} basis[k].
    """
    offsets: np.ndarray
    distance_sq: np.ndarray
    gamma: np.ndarray
    basis: np.ndarray

    @property
    def num_uavs(self) -> int:
        return self.offsets.shape[0]

    def fim(self, p_s) -> np.ndarray:
        return np.einsum("k,kij->ij", np.asarray(p_s, dtype=np.float64), self.basis)

    def fim_expr(self, p_s: cp.Expression) -> cp.Expression:
        return sum(p_s[k] * self.basis[k] for k in range(self.num_uavs))

    def nonrobust_comm(self) -> np.ndarray:
        return self.distance_sq / self.gamma


def system_terms(scenario: Scenario, rate_floor: float) -> SystemTerms:
    offsets = (scenario.ue_estimate - scenario.uav_positions).numpy()
    return SystemTerms(
        offsets=offsets,
        distance_sq=np.sum(offsets ** 2, axis=-1),
        gamma=np.array([gamma(scenario, k, rate_floor) for k in range(scenario.num_uavs)]),
        basis=fim_basis(scenario).numpy(),
    )


def balance(expr, distance: float):
    """Congruence diag(I_3, 1/d) of a 4x4 LMI; keeps PSD-ness, evens out the entry scales."""
    s = np.diag([1.0, 1.0, 1.0, 1.0 / distance])
    return s @ expr @ s


######################################
# Checks and solving
######################################


def check_problem(terms: SystemTerms, config: AllocatorConfig) -> None:
    """Necessary conditions every scheme shares: informative geometry, reachable rate floors."""
    crb(terms.fim(np.ones(terms.num_uavs)))
    floor = terms.nonrobust_comm().sum()
    if floor > config.total_power:
        raise BudgetInfeasibleError(
            f"the rate floor {config.rate_floor} needs at least {floor:.6g} W of communication power "
            f"even without sensing error, above P_total = {config.total_power:.6g} W"
        )


def run_step(problem: ConicProblem, config: AllocatorConfig, label: str, **context) -> SolveReport:
    """Solves one subproblem; numerical failures abort with the iteration context."""
    dump = None
    if config.dump_dir is not None:
        os.makedirs(config.dump_dir, exist_ok=True)
        dump = os.path.join(config.dump_dir, f"{label}.dat-s")
    report = solve(problem, tol=config.solver_tol, dump=dump)
    if report.status == NUMERICAL_FAILURE:
        raise NumericalFailureError(f"{label}: {report.message}", report=report, **context)
    return report


def clip(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


######################################
# Alternating optimization
######################################


# comm_step(sensing, label) -> (comm, aux, status); sensing_step(sensing, comm, aux, label) -> (sensing, status)
CommStep = Callable[[np.ndarray, str], Tuple[np.ndarray, dict, str]]
SensingStep = Callable[[np.ndarray, np.ndarray, dict, str], Tuple[np.ndarray, str]]


def _feasible_start(name, terms, config, comm_step) -> Tuple[np.ndarray, np.ndarray, dict]:
    """
    First certified pair. The default start is tried first; if its comm step
    leaves no room in the budget, the same shape is rescaled to sensing
    fractions 0.95, 0.90, ..., 0.05 of P_total.
    """
    start = config.start(terms.num_uavs)
    candidates = [start] + [start * (t * config.total_power / start.sum()) for t in np.arange(0.95, 0.0, -0.05)]
    for i, p_s in enumerate(candidates):
        p_c, aux, _ = comm_step(p_s, f"{name}_start{i:02d}_comm")
        if p_s.sum() + p_c.sum() <= config.budget:
            return p_s, p_c, aux
    raise BudgetInfeasibleError(
        f"{name}: no sensing split leaves enough of P_total = {config.total_power:.6g} W "
        f"for the robust rate floor"
    )


def alternate(name: str, terms: SystemTerms, config: AllocatorConfig,
              comm_step: CommStep, sensing_step: SensingStep) -> Tuple[PowerAllocation, IterationTrace]:
    """
    Alternating optimization with certified iterates.

    Each iteration runs the sensing step at frozen comm-side variables, then
    the comm step at the new J_p. The comm step is exact for a fixed J_p, so
    the pair it closes is feasible for the robust constraints; the pair is
    accepted if it fits the budget and does not increase tr(J_p^{-1}).

    Failures inside a step are re-raised with the last accepted pair and the
    trace attached.
    """
    trace = IterationTrace(scheme=name)
    p_s, p_c, aux = _feasible_start(name, terms, config, comm_step)
    best = PowerAllocation(sensing=p_s, comm=p_c)
    objective = crb(terms.fim(p_s))

    pbar = trange(1, config.max_iters + 1, disable=not config.show_pbar, desc=name)
    trace.stop_reason = "max_iters"
    for n in pbar:
        try:
            new_s, sensing_status = sensing_step(p_s, p_c, aux, f"{name}_{n:02d}_sensing")
            new_c, new_aux, comm_status = comm_step(new_s, f"{name}_{n:02d}_comm")
        except (InfeasibleError, NumericalFailureError) as err:
            err.allocation = err.allocation if err.allocation is not None else best
            err.trace = trace
            raise

        if new_s.sum() + new_c.sum() > config.total_power:
            trace.stop_reason = "budget"
            break
        new_objective = crb(terms.fim(new_s))
        if new_objective > objective * (1 + DESCENT_SLACK):
            trace.stop_reason = "no_descent"
            break

        decrease = objective - new_objective
        p_s, p_c, aux, objective = new_s, new_c, new_aux, new_objective
        best = PowerAllocation(sensing=p_s, comm=p_c)
        trace.append(n, objective, best, aux, (sensing_status, comm_status))
        pbar.set_postfix_str(f"crb: {objective:.6f}")

        if decrease < config.tolerance:
            trace.stop_reason = "tolerance"
            break

    return best, trace
