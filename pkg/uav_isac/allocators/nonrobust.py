"""
nonrobust.py

Baseline that trusts the estimated UE position: every rate floor binds at
P_c,k = d_k^2 / gamma_k and the rest of the budget goes to sensing.
"""

from typing import Tuple

import cvxpy as cp

from ..conic import ConicBuilder, trace_inverse_epigraph
from ..errors import BudgetInfeasibleError
from ..fisher import crb
from ..geometry import Scenario
from .base import AllocatorConfig, IterationTrace, PowerAllocation, check_problem, clip, run_step, system_terms


def nonrobust_allocate(scenario: Scenario, config: AllocatorConfig) -> Tuple[PowerAllocation, IterationTrace]:
    terms = system_terms(scenario, config.rate_floor)
    check_problem(terms, config)
    floor = terms.nonrobust_comm()
    trace = IterationTrace(scheme="nonrobust")

    builder = ConicBuilder()
    ps = builder.vector("sensing", terms.num_uavs, nonneg=True)
    pc = builder.vector("comm", terms.num_uavs, nonneg=True)
    j_expr = terms.fim_expr(ps)
    builder.minimize(trace_inverse_epigraph(builder, j_expr))
    builder.add_lmi(j_expr, name="fim")
    builder.add_linear(cp.sum(ps) + cp.sum(pc) <= config.budget)
    builder.add_linear(cp.multiply(pc, terms.gamma / terms.distance_sq) >= 1)
    report = run_step(builder.build(), config, "nonrobust", trace=trace)
    if not report.optimal:
        raise BudgetInfeasibleError(f"nonrobust: rate floors leave no budget for sensing ({report.message})",
                                    trace=trace)

    # the rate constraints bind at the optimum; snap the solver's comm powers onto them
    p_s = clip(report["sensing"])
    overshoot = p_s.sum() + floor.sum() - config.total_power
    if overshoot > 0:
        p_s = p_s * (1 - overshoot / p_s.sum())
    allocation = PowerAllocation(sensing=p_s, comm=floor.copy())
    trace.append(1, crb(terms.fim(p_s)), allocation, {"solver_comm": report["comm"]}, (report.status,))
    trace.stop_reason = "tolerance"
    return allocation, trace


def solve_nonrobust(scenario: Scenario, config: AllocatorConfig) -> PowerAllocation:
    """
    Allocation under perfect CSI: P_c,k = d_k^2 / gamma_k, remaining power on
    sensing.

    Raises BudgetInfeasibleError when sum_k d_k^2 / gamma_k > P_total.
    """
    return nonrobust_allocate(scenario, config)[0]
