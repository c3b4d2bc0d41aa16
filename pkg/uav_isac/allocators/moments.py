"""
moments.py

CVaR-AO: robust allocation when only the mean (0) and covariance (J_p^{-1})
of the LSE are known. Each rate floor is enforced through the worst-case
CVaR of its quadratic loss over all distributions with those moments, an
SDP in auxiliaries M_k (4x4) and chi_k. The comm step is exact for a fixed
J_p; the sensing step linearizes tr(D M) in X = D^{-1} = blkdiag(J_p, 1).
"""

from typing import List, Optional, Tuple

import cvxpy as cp
import numpy as np
from scipy.linalg import block_diag

from ..conic import ConicBuilder, lmi, solve, trace_inverse_epigraph
from ..errors import BudgetInfeasibleError, NumericalFailureError
from ..geometry import Scenario
from ..utils import spd_inv
from .base import (AllocatorConfig, IterationTrace, PowerAllocation, alternate, check_problem,
                   clip, gamma, run_step, system_terms)


def _check_p_out(p_out: float) -> None:
    if not 0 < p_out < 1:
        raise ValueError(f"p_out must lie in (0, 1), got {p_out}")


def worst_case_cvar(quad: np.ndarray, lin: np.ndarray, const: float, mean: np.ndarray,
                    cov: np.ndarray, p_out: float, tol: float = 1e-7) -> float:
    """
    Worst-case CVaR at level p_out of the loss xi^T B xi + b^T xi + b0 over
    all distributions of xi with the given mean and covariance:

        min chi + tr(Omega M) / p_out
        s.t. M >= 0,  M - [[B, b/2], [b^T/2, b0 - chi]] >= 0,

    with the second-moment matrix Omega = [[cov + mean mean^T, mean], [mean^T, 1]].
    """
    _check_p_out(p_out)
    quad = np.atleast_2d(np.asarray(quad, dtype=np.float64))
    lin = np.asarray(lin, dtype=np.float64).reshape(-1, 1)
    mean = np.asarray(mean, dtype=np.float64).reshape(-1, 1)
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    n = quad.shape[0]

    omega = np.block([[cov + mean @ mean.T, mean], [mean.T, np.ones((1, 1))]])
    builder = ConicBuilder()
    m = builder.symmetric("M", n + 1)
    chi = builder.scalar("chi")
    loss = cp.bmat([[quad, lin / 2], [lin.T / 2, cp.reshape(const - chi, (1, 1), order="C")]])
    builder.add(lmi(m), lmi(m - loss))
    builder.minimize(chi + cp.trace(omega @ m) / p_out)
    report = solve(builder.build(), tol=tol)
    if not report.optimal:
        raise NumericalFailureError(f"worst-case CVaR: {report.message}", report=report)
    return report.optimum


def cvar_constraints(scenario: Scenario, k: int, p_c, j_expr, m, chi, p_out: float,
                     rate_floor: float) -> List[cp.Constraint]:
    """
    Worst-case CVaR restriction of Pr{rate_k < R_bar} <= p_out over all LSE
    distributions with mean 0 and covariance J^{-1}.

    Arguments:
        - scenario: Scenario.
        - k: UAV index.
        - p_c: Comm power of UAV k (number or cvxpy expression).
        - j_expr: Numeric (3, 3) J_p; D = blkdiag(J^{-1}, 1) must be a constant.
        - m: Symmetric 4x4 auxiliary.
        - chi: Scalar auxiliary.
        - p_out: Tolerated outage probability.
        - rate_floor: R_bar.

    Returns:
        - [M >= 0, M - [[I, a], [a^T, d^2 - gamma P_c - chi]] >= 0, chi + tr(D M) / p_out <= 0].
    """
    _check_p_out(p_out)
    a = scenario.offset(k).numpy().reshape(3, 1)
    d = moment_matrix(np.asarray(j_expr, dtype=np.float64))
    dist_sq = float(a.ravel() @ a.ravel())
    corner = cp.reshape(dist_sq - gamma(scenario, k, rate_floor) * p_c - chi, (1, 1), order="C")
    inner = cp.bmat([[np.eye(3), a], [a.T, corner]])
    return [lmi(m), lmi(m - inner), chi + cp.trace(d @ m) / p_out <= 0]


def moment_matrix(j: np.ndarray) -> np.ndarray:
    """D = blkdiag(J^{-1}, 1)."""
    return block_diag(spd_inv(j), 1.0)


def linearized_trace(d0: np.ndarray, x_expr, x0: np.ndarray, m: np.ndarray, left_grouping: bool = False):
    """
    First-order expansion of tr(X^{-1} M) around X_0 = D_0^{-1}:
    tr(D_0 M) - tr(D_0 (X - X_0) D_0 M), or tr(D_0 M) - tr(D_0^2 (X - X_0) M)
    with `left_grouping`.
    """
    dx = x_expr - x0
    if left_grouping:
        return np.trace(d0 @ m) - cp.trace(d0 @ d0 @ dx @ m)
    return np.trace(d0 @ m) - cp.trace(d0 @ dx @ d0 @ m)


def _lift(j_expr):
    """X = blkdiag(J, 1) for an affine J."""
    return cp.bmat([[j_expr, np.zeros((3, 1))], [np.zeros((1, 3)), np.ones((1, 1))]])


def solve_cvarao(scenario: Scenario, config: AllocatorConfig, p_out: float) -> Tuple[PowerAllocation, IterationTrace]:
    """
    Alternating optimization over (P_c, M_k, chi_k) and P_s.

    The sensing step linearizes the CVaR trace term around D_0, rebuilt at
    every iterate unless `config.freeze_linearization` keeps it at P_s^(0).

    Arguments:
        - scenario: Scenario.
        - config: AllocatorConfig.
        - p_out: Tolerated outage probability.

    Returns:
        - The last accepted PowerAllocation and the IterationTrace.
    """
    _check_p_out(p_out)
    terms = system_terms(scenario, config.rate_floor)
    check_problem(terms, config)
    num_uavs = terms.num_uavs
    congruences = [np.diag([1.0, 1.0, 1.0, 1.0 / np.sqrt(d2)]) for d2 in terms.distance_sq]
    frozen: Optional[np.ndarray] = None

    def comm_step(p_s, label):
        j = terms.fim(p_s)
        builder = ConicBuilder()
        p_c = builder.vector("comm", num_uavs, nonneg=True)
        for k in range(num_uavs):
            m = builder.symmetric(f"M{k}", 4)
            chi = builder.scalar(f"chi{k}")
            *lmis, cvar_bound = cvar_constraints(scenario, k, p_c[k], j, m, chi, p_out, config.rate_floor)
            builder.add(*lmis, congruence=congruences[k])
            builder.add_linear(cvar_bound)
        builder.minimize(cp.sum(p_c))
        report = run_step(builder.build(), config, label)
        if not report.optimal:
            raise BudgetInfeasibleError(f"{label}: no CVaR certificate for the rate floor ({report.message})")
        aux = {
            "M": [report[f"M{k}"] for k in range(num_uavs)],
            "chi": [float(report[f"chi{k}"]) for k in range(num_uavs)],
            "fim": j,
        }
        return clip(report["comm"]), aux, report.status

    def sensing_step(p_s, p_c, aux, label):
        nonlocal frozen
        if frozen is None or not config.freeze_linearization:
            frozen = aux["fim"]
        d0 = moment_matrix(frozen)
        x0 = block_diag(frozen, 1.0)

        builder = ConicBuilder()
        ps = builder.vector("sensing", num_uavs, nonneg=True)
        j_expr = terms.fim_expr(ps)
        builder.minimize(trace_inverse_epigraph(builder, j_expr))
        builder.add_lmi(j_expr, name="fim")
        builder.add_linear(cp.sum(ps) <= config.budget - p_c.sum())
        x_expr = _lift(j_expr)
        for k in range(num_uavs):
            trace_term = linearized_trace(d0, x_expr, x0, aux["M"][k], config.left_grouping)
            builder.add_linear((aux["chi"][k] + trace_term / p_out) / terms.distance_sq[k] <= 0)
        report = run_step(builder.build(), config, label)
        if not report.optimal:
            raise BudgetInfeasibleError(f"{label}: sensing subproblem lost feasibility ({report.message})")
        return clip(report["sensing"]), report.status

    best, trace = alternate("cvar-ao", terms, config, comm_step, sensing_step)
    for record in trace.records:
        record.aux.pop("fim", None)
    return best, trace
