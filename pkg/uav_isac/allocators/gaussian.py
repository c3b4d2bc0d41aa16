"""
gaussian.py

BI-SCA: robust allocation when du ~ N(0, J_p^{-1}) and each rate floor may
fail with probability at most p_out. A Bernstein-type bound on the Gaussian
quadratic form gives a deterministic convex constraint with slacks omega_k
and rho; the terms that are not jointly convex in J_p are linearized around
the previous iterate and the surrogate is solved repeatedly.
"""

from math import log, sqrt
from typing import NamedTuple, Optional, Tuple

import cvxpy as cp
import numpy as np
from scipy.optimize import brentq, minimize_scalar
from tqdm import trange

from ..conic import ConicBuilder, affine, lmi, trace_inverse_epigraph
from ..errors import BudgetInfeasibleError, NumericalFailureError, ScaInfeasibleError
from ..fisher import crb
from ..geometry import Scenario
from ..utils import inv_sqrtm, spd_inv
from .base import (DESCENT_SLACK, AllocatorConfig, IterationTrace, PowerAllocation, SystemTerms,
                   check_problem, clip, gamma, run_step, system_terms)


class BernsteinConstraints(NamedTuple):
    """
    rate: tr(J^{-1}) + sqrt(2 eta) omega + eta rho - gamma P_c + d^2 <= 0.
    spread: ||[vec(J^{-1}); sqrt(2) J^{-1/2} a]|| <= omega, only for a numeric J.
    eigen: [[rho I, I], [I, J]] >= 0, i.e. rho >= lambda_max(J^{-1}).
    """
    rate: cp.Constraint
    spread: Optional[cp.Constraint]
    eigen: cp.Constraint

    def as_list(self) -> list:
        return [c for c in self if c is not None]


def outage_exponent(p_out: float) -> float:
    """eta = -ln(p_out)."""
    if not 0 < p_out < 1:
        raise ValueError(f"p_out must lie in (0, 1), got {p_out}")
    return -log(p_out)


def bernstein_constraints(scenario: Scenario, k: int, p_c, j_expr, omega, rho, p_out: float,
                          rate_floor: float, trace_bound=None, scale: float = 1.0) -> BernsteinConstraints:
    """
    Convex restriction of Pr{rate_k < R_bar} <= p_out under du ~ N(0, J^{-1}).

    Arguments:
        - scenario: Scenario.
        - k: UAV index.
        - p_c: Comm power of UAV k (number or cvxpy expression).
        - j_expr: J_p, numeric (3, 3) or affine cvxpy expression.
        - omega, rho: Slacks (numbers or cvxpy expressions).
        - p_out: Tolerated outage probability.
        - rate_floor: R_bar.
        - trace_bound: Stand-in for tr(J^{-1}), e.g. an epigraph variable. Required
          when `j_expr` is not numeric.
        - scale: Positive divisor of the rate constraint, e.g. d_k^2 to keep its
          coefficients near unity.

    Returns:
        - BernsteinConstraints.
    """
    eta = outage_exponent(p_out)
    a = scenario.offset(k).numpy()
    numeric = not isinstance(j_expr, cp.Expression)

    spread = None
    if numeric:
        j = np.asarray(j_expr, dtype=np.float64)
        j_inv = spd_inv(j)
        if trace_bound is None:
            trace_bound = float(np.trace(j_inv))
        spread = cp.Constant(exact_omega(j, a)) <= omega
    elif trace_bound is None:
        raise ValueError("a symbolic J_p needs a trace_bound")

    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    rate = (affine(trace_bound) + sqrt(2 * eta) * omega + eta * rho
            - gamma(scenario, k, rate_floor) * p_c + float(a @ a)) / scale <= 0
    eye = np.eye(3)
    eigen = lmi(cp.bmat([[rho * eye, eye], [eye, j_expr]]))
    return BernsteinConstraints(rate=rate, spread=spread, eigen=eigen)


def exact_omega(j: np.ndarray, offset: np.ndarray) -> float:
    """Smallest feasible omega: sqrt(||J^{-1}||_F^2 + 2 a^T J^{-1} a)."""
    j_inv = spd_inv(j)
    w = inv_sqrtm(j) @ offset
    return float(np.sqrt(np.sum(j_inv ** 2) + 2 * w @ w))


def bernstein_certificate(scenario: Scenario, allocation: PowerAllocation, p_out: float,
                          rate_floor: float) -> np.ndarray:
    """
    Exact residual of the Bernstein restriction per UAV at an allocation,
    with omega and rho at their smallest feasible values. Non-positive
    entries certify the chance constraints.
    """
    terms = system_terms(scenario, rate_floor)
    j = terms.fim(allocation.sensing)
    eta = outage_exponent(p_out)
    j_inv = spd_inv(j)
    base = np.trace(j_inv) + eta * np.linalg.eigvalsh(j_inv)[-1]
    omega = np.array([exact_omega(j, a) for a in terms.offsets])
    return base + sqrt(2 * eta) * omega - terms.gamma * allocation.comm + terms.distance_sq


def sca_linearize(j0: np.ndarray, j_expr, omega0: float, omega, left_grouping: bool = False):
    """
    First-order surrogates around J_0.

    Returns:
        - f1: tr(J_0^{-2}) - 2 tr(J_0^{-3}(J - J_0)), tangent to tr(J^{-2}).
        - Omega: J_0^{-1} - J_0^{-1}(J - J_0)J_0^{-1}, tangent to J^{-1}
          (J_0^{-1} - J_0^{-2}(J - J_0) with `left_grouping`).
        - f2: omega_0^2 + 2 omega_0 (omega - omega_0), a minorant of omega^2.
    """
    try:
        j0_inv = spd_inv(j0)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"cannot linearize around a singular J_0: {err}") from err
    j0_inv2 = j0_inv @ j0_inv
    dj = j_expr - j0

    f1 = np.trace(j0_inv2) - 2 * cp.trace(j0_inv2 @ j0_inv @ dj)
    if left_grouping:
        omega_lin = j0_inv - j0_inv2 @ dj
    else:
        omega_lin = j0_inv - j0_inv @ dj @ j0_inv
    f2 = omega0 ** 2 + 2 * omega0 * (omega - omega0)
    return f1, omega_lin, f2


######################################
# Exact restoration
######################################


def _exact_comm(terms: SystemTerms, direction: np.ndarray, eta: float):
    """P_c,k(t) at sensing powers t * direction, vectorized over UAVs."""
    j_inv = spd_inv(terms.fim(direction))
    trace = np.trace(j_inv)
    frob = np.sum(j_inv ** 2)
    top = np.linalg.eigvalsh(j_inv)[-1]
    quad = np.einsum("ki,ij,kj->k", terms.offsets, j_inv, terms.offsets)

    def comm(t):
        omega = np.sqrt(frob / t ** 2 + 2 * quad / t)
        return (trace / t + sqrt(2 * eta) * omega + eta * top / t + terms.distance_sq) / terms.gamma

    return comm


def restore(terms: SystemTerms, direction: np.ndarray, eta: float, budget: float):
    """
    Largest t such that t * direction plus its exact minimum comm powers fit
    the budget.

    Returns:
        - (sensing, comm, t), or None when no point on the ray fits.
    """
    comm = _exact_comm(terms, direction, eta)
    total = direction.sum()

    def slack(t):
        return t * total + comm(t).sum() - budget

    hi = budget / total
    res = minimize_scalar(slack, bounds=(1e-9 * hi, hi), method="bounded", options=dict(xatol=1e-12 * hi))
    if not res.fun < 0:
        return None
    t = brentq(slack, res.x, hi, xtol=1e-15 * hi, maxiter=500)
    while slack(t) > 0:
        t = res.x + (t - res.x) * (1 - 1e-12)
    return t * direction, comm(t), t


######################################
# BI-SCA
######################################


def solve_bisca(scenario: Scenario, config: AllocatorConfig, p_out: float) -> Tuple[PowerAllocation, IterationTrace]:
    """
    Successive convex approximation of the Bernstein-restricted problem.

    Each surrogate is built at the previous sensing powers. Its sensing
    solution is pushed along its ray to the largest budget-feasible point
    under the exact (non-linearized) restriction, so every accepted pair is
    certified; a pair that would increase tr(J_p^{-1}) ends the run.

    Arguments:
        - scenario: Scenario.
        - config: AllocatorConfig.
        - p_out: Tolerated outage probability.

    Returns:
        - The last accepted PowerAllocation and the IterationTrace.
    """
    eta = outage_exponent(p_out)
    terms = system_terms(scenario, config.rate_floor)
    check_problem(terms, config)
    num_uavs = terms.num_uavs
    trace = IterationTrace(scheme="bi-sca")

    p_s = config.start(num_uavs)
    best, objective = None, np.inf
    pbar = trange(1, config.max_iters + 1, disable=not config.show_pbar, desc="bi-sca")
    trace.stop_reason = "max_iters"
    for n in pbar:
        label = f"bi-sca_{n:02d}_surrogate"
        j0 = terms.fim(p_s)
        omega0 = np.array([exact_omega(j0, a) for a in terms.offsets])

        builder = ConicBuilder()
        ps = builder.vector("sensing", num_uavs, nonneg=True)
        pc = builder.vector("comm", num_uavs, nonneg=True)
        omega = builder.vector("omega", num_uavs, nonneg=True)
        rho = builder.scalar("rho", nonneg=True)
        j_expr = terms.fim_expr(ps)
        bound = trace_inverse_epigraph(builder, j_expr)
        builder.minimize(bound)
        builder.add_lmi(j_expr, name="fim")
        builder.add_linear(cp.sum(ps) + cp.sum(pc) <= config.budget)
        for k in range(num_uavs):
            f1, omega_lin, f2 = sca_linearize(j0, j_expr, omega0[k], omega[k], config.left_grouping)
            a = terms.offsets[k]
            builder.add_linear((f1 + 2 * a @ omega_lin @ a - f2) / terms.distance_sq[k] <= 0)
            restriction = bernstein_constraints(scenario, k, pc[k], j_expr, omega[k], rho, p_out, config.rate_floor,
                                                trace_bound=bound, scale=terms.distance_sq[k])
            builder.add_linear(restriction.rate)
        builder.add_lmi(rho * np.eye(3) - omega_lin, name="eigen")

        try:
            report = run_step(builder.build(), config, label)
        except NumericalFailureError as err:
            err.allocation, err.trace = best, trace
            raise
        if not report.optimal:
            raise ScaInfeasibleError(f"{label}: surrogate infeasible ({report.message})",
                                     linearization_point=p_s.copy(), allocation=best, trace=trace)

        direction = clip(report["sensing"])
        if not direction.sum() > 0:
            raise ScaInfeasibleError(f"{label}: surrogate returned no sensing power",
                                     linearization_point=p_s.copy(), allocation=best, trace=trace)
        restored = restore(terms, direction, eta, config.budget)
        if restored is None:
            if best is None:
                raise BudgetInfeasibleError(
                    f"{label}: no scaling of the surrogate's sensing powers meets the chance constraints "
                    f"within P_total = {config.total_power:.6g} W", allocation=best, trace=trace)
            trace.stop_reason = "budget"
            break

        new_s, new_c, scale = restored
        new_objective = crb(terms.fim(new_s))
        if best is not None and new_objective > objective * (1 + DESCENT_SLACK):
            trace.stop_reason = "no_descent"
            break

        decrease = objective - new_objective
        p_s, objective = new_s, new_objective
        best = PowerAllocation(sensing=new_s, comm=new_c)
        j_inv = spd_inv(terms.fim(new_s))
        aux = {
            "omega": [exact_omega(terms.fim(new_s), a) for a in terms.offsets],
            "rho": float(np.linalg.eigvalsh(j_inv)[-1]),
            "ray_scale": float(scale),
            "surrogate": float(report.optimum),
        }
        trace.append(n, objective, best, aux, (report.status,))
        pbar.set_postfix_str(f"crb: {objective:.6f}")

        if decrease < config.tolerance:
            trace.stop_reason = "tolerance"
            break

    return best, trace
