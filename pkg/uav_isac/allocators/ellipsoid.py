"""
ellipsoid.py

S-AO: robust allocation when the LSE lies in {du : du^T J_p du <= delta}.
The S-procedure turns each worst-case rate floor into one 4x4 LMI with a
multiplier lambda_s; the comm step minimizes sum P_c over (P_c, lambda_s),
the sensing step minimizes tr(J_p^{-1}) over P_s with both frozen.
"""

from typing import Tuple

import cvxpy as cp
import numpy as np

from ..channel import worst_case_lse
from ..conic import ConicBuilder, trace_inverse_epigraph
from ..errors import BudgetInfeasibleError
from ..geometry import Scenario
from .base import (AllocatorConfig, IterationTrace, PowerAllocation, SystemTerms, alternate, balance,
                   check_problem, clip, gamma, run_step, system_terms)

# relative lift of the certified comm powers above the exact worst case
CERTIFY_LIFT = 1e-12


def ellipsoid_lmi(scenario: Scenario, k: int, p_c, j_expr, lam, delta: float, rate_floor: float) -> cp.Expression:
    """
    lambda_s A_1 - A_0 with A_1 = [[J, 0], [0, -delta]] and
    A_0 = [[I, u_hat - p_k], [(u_hat - p_k)^T, d_k^2 - gamma_k P_c]].

    PSD for some lambda_s >= 0 iff the rate floor holds for every LSE in the
    ellipsoid. Every argument may be a number or a cvxpy expression.

    Returns:
        - 4x4 cvxpy expression.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    offset = scenario.offset(k).numpy()
    a = offset.reshape(3, 1)
    gain, distance_sq = gamma(scenario, k, rate_floor), float(offset @ offset)
    corner = cp.reshape(-lam * delta + gain * p_c - distance_sq, (1, 1), order="C")
    return cp.bmat([[lam * j_expr - np.eye(3), -a], [-a.T, corner]])


def _certified_comm(scenario, terms: SystemTerms, j: np.ndarray, delta: float) -> np.ndarray:
    worst = np.array([worst_case_lse(scenario, k, j, delta)[1] for k in range(terms.num_uavs)])
    return worst / terms.gamma * (1 + CERTIFY_LIFT)


def solve_sao(scenario: Scenario, config: AllocatorConfig, delta: float) -> Tuple[PowerAllocation, IterationTrace]:
    """
    Alternating optimization over comm powers with one S-procedure
    multiplier lambda_s, and sensing powers.

    Arguments:
        - scenario: Scenario.
        - config: AllocatorConfig.
        - delta: Ellipsoid size.

    Returns:
        - The last accepted PowerAllocation and the IterationTrace.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    terms = system_terms(scenario, config.rate_floor)
    check_problem(terms, config)
    distances = np.sqrt(terms.distance_sq)
    num_uavs = terms.num_uavs

    def comm_step(p_s, label):
        j = terms.fim(p_s)
        builder = ConicBuilder()
        p_c = builder.vector("comm", num_uavs, nonneg=True)
        lam = builder.scalar("lambda_s", nonneg=True)
        for k in range(num_uavs):
            rate_lmi = ellipsoid_lmi(scenario, k, p_c[k], j, lam, delta, config.rate_floor)
            builder.add_lmi(balance(rate_lmi, distances[k]), name=f"rate{k}")
        builder.minimize(cp.sum(p_c))
        report = run_step(builder.build(), config, label)
        if not report.optimal:
            raise BudgetInfeasibleError(f"{label}: no multiplier certifies the rate floor ({report.message})")
        p_c = np.maximum(clip(report["comm"]), _certified_comm(scenario, terms, j, delta))
        return p_c, {"lambda_s": float(report["lambda_s"])}, report.status

    def sensing_step(p_s, p_c, aux, label):
        builder = ConicBuilder()
        ps = builder.vector("sensing", num_uavs, nonneg=True)
        j_expr = terms.fim_expr(ps)
        builder.minimize(trace_inverse_epigraph(builder, j_expr))
        builder.add_lmi(j_expr, name="fim")
        builder.add_linear(cp.sum(ps) <= config.budget - p_c.sum())
        for k in range(num_uavs):
            rate_lmi = ellipsoid_lmi(scenario, k, p_c[k], j_expr, aux["lambda_s"], delta, config.rate_floor)
            builder.add_lmi(balance(rate_lmi, distances[k]), name=f"rate{k}")
        report = run_step(builder.build(), config, label)
        if not report.optimal:
            raise BudgetInfeasibleError(f"{label}: sensing subproblem lost feasibility ({report.message})")
        return clip(report["sensing"]), report.status

    return alternate("s-ao", terms, config, comm_step, sensing_step)
