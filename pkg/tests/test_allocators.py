from math import log, sqrt

import cvxpy as cp
import numpy as np
import pytest

from conftest import triangle
from uav_isac.allocators import (AllocatorConfig, ArbitraryMoments, Ellipsoid, Gaussian, PowerAllocation, allocate,
                                 bernstein_certificate, bernstein_constraints, cvar_constraints, ellipsoid_lmi,
                                 exact_omega, gamma, linearized_trace, moment_matrix, outage_exponent,
                                 robustness_model, sca_linearize, system_terms, worst_case_cvar)
from uav_isac.allocators.base import balance
from uav_isac.allocators.gaussian import restore
from uav_isac.channel import worst_case_lse
from uav_isac.conic import INFEASIBLE, OPTIMAL, ConicBuilder, solve
from uav_isac.errors import BudgetInfeasibleError, GeometryInfeasibleError
from uav_isac.fisher import crb
from uav_isac.geometry import Scenario

ROBUST = ("s-ao", "bi-sca", "cvar-ao")


def _single_uav():
    """One UAV with u_hat - p = (3, 4, 0)."""
    return Scenario.create([[-3, -4, 0]], [0, 0, 0], 0.1, 5e6, 1e-9)


######################################
# Models and configuration
######################################


def test_models_validate():
    with pytest.raises(ValueError):
        Ellipsoid(0.0)
    with pytest.raises(ValueError):
        Gaussian(1.0)
    with pytest.raises(ValueError):
        ArbitraryMoments(0.0)
    with pytest.raises(ValueError):
        AllocatorConfig(rate_floor=2.0, total_power=-1.0)
    with pytest.raises(ValueError):
        AllocatorConfig(rate_floor=2.0, total_power=1.0, initial_sensing=[0.1, 0.0, 0.1])


def test_robustness_model_per_scheme():
    assert robustness_model("s-ao", 2.0, 0.1) == Ellipsoid(2.0)
    assert robustness_model("bi-sca", 2.0, 0.1) == Gaussian(0.1)
    assert robustness_model("cvar-ao", 2.0, 0.1) == ArbitraryMoments(0.1)
    assert robustness_model("nonrobust", 2.0, 0.1) == Gaussian(0.1)
    with pytest.raises(ValueError):
        robustness_model("greedy", 1.0, 0.1)


def test_allocate_rejects_mismatched_model(scenario, config):
    with pytest.raises(TypeError):
        allocate("s-ao", scenario, config, Gaussian(0.05))
    with pytest.raises(TypeError):
        allocate("cvar-ao", scenario, config, Gaussian(0.05))


def test_default_start(config):
    np.testing.assert_allclose(config.start(3), np.full(3, 1 / 6))
    assert config.budget < config.total_power


def test_power_allocation_checks():
    with pytest.raises(ValueError):
        PowerAllocation(sensing=np.ones(2), comm=np.ones(3))
    with pytest.raises(ValueError):
        PowerAllocation(sensing=np.array([0.1, -0.1]), comm=np.ones(2))
    assert PowerAllocation(sensing=np.array([0.1, 0.2]), comm=np.array([0.3, 0.4])).total == pytest.approx(1.0)


######################################
# Ellipsoid LMI
######################################


def test_ellipsoid_lmi_blocks():
    scn = _single_uav()
    p_c = 30.0 / gamma(scn, 0, 2.0)
    no_multiplier = ellipsoid_lmi(scn, 0, p_c, np.eye(3), 0.0, 1.0, 2.0).value
    np.testing.assert_allclose(no_multiplier[:3, :3], -np.eye(3))
    np.testing.assert_allclose(no_multiplier[:3, 3], [-3, -4, 0])
    assert no_multiplier[3, 3] == pytest.approx(5.0)
    unit = ellipsoid_lmi(scn, 0, p_c, np.zeros((3, 3)), 1.0, 0.5, 2.0).value
    assert unit[3, 3] == pytest.approx(4.5)
    np.testing.assert_allclose(unit[:3, :3], -np.eye(3))


def _certifiable(scn, p_c, j, delta):
    builder = ConicBuilder()
    lam = builder.scalar("lambda_s", nonneg=True)
    d = float(np.linalg.norm(scn.offset(0).numpy()))
    builder.add_lmi(balance(ellipsoid_lmi(scn, 0, p_c, j, lam, delta, 2.0), d))
    builder.minimize(lam)
    return solve(builder.build()).status


@pytest.mark.parametrize("j", [np.eye(3), np.diag([0.5, 2.0, 1.0])])
def test_ellipsoid_lmi_matches_worst_case(j):
    scn = Scenario.create([[20, 0, 30]], [0, 0, 0], 0.1, 5e6, 1e-9)
    delta = 2.0
    _, worst = worst_case_lse(scn, 0, j, delta)
    g = gamma(scn, 0, 2.0)
    assert _certifiable(scn, worst / g * 1.01, j, delta) == OPTIMAL
    assert _certifiable(scn, worst / g * 0.99, j, delta) == INFEASIBLE


def test_ellipsoid_lmi_rejects_bad_delta():
    with pytest.raises(ValueError):
        ellipsoid_lmi(_single_uav(), 0, 1.0, np.eye(3), 1.0, 0.0, 2.0)


######################################
# Bernstein restriction and SCA
######################################


def test_outage_exponent():
    assert outage_exponent(0.1) == pytest.approx(2.302585, abs=1e-6)
    assert outage_exponent(0.05) == pytest.approx(log(20))
    with pytest.raises(ValueError):
        outage_exponent(1.0)


def test_exact_omega_example():
    assert exact_omega(np.eye(3), np.array([1.0, 0.0, 0.0])) == pytest.approx(sqrt(5))
    assert exact_omega(4 * np.eye(3), np.zeros(3)) == pytest.approx(sqrt(3) / 4)


def test_bernstein_constraints_numeric():
    scn = _single_uav()
    eta = outage_exponent(0.05)
    omega = exact_omega(np.eye(3), scn.offset(0).numpy())
    need = 3 + sqrt(2 * eta) * omega + eta * 1.0 + 25
    g = gamma(scn, 0, 2.0)
    ok = bernstein_constraints(scn, 0, need / g * (1 + 1e-9), np.eye(3), omega, 1.0, 0.05, 2.0)
    assert all(c.value() for c in ok.as_list())
    short = bernstein_constraints(scn, 0, need / g * (1 - 1e-6), np.eye(3), omega, 1.0, 0.05, 2.0)
    assert not short.rate.value()
    loose_rho = bernstein_constraints(scn, 0, need / g, np.eye(3), omega, 0.5, 0.05, 2.0)
    assert not loose_rho.eigen.value()


def test_bernstein_rate_scale_keeps_feasible_set():
    scn = _single_uav()
    eta = outage_exponent(0.1)
    omega = exact_omega(np.eye(3), scn.offset(0).numpy())
    need = (3 + sqrt(2 * eta) * omega + eta + 25) / gamma(scn, 0, 2.0)
    for p_c, feasible in ((need * (1 + 1e-9), True), (need * (1 - 1e-6), False)):
        scaled = bernstein_constraints(scn, 0, p_c, np.eye(3), omega, 1.0, 0.1, 2.0, scale=25.0)
        assert bool(scaled.rate.value()) is feasible
    with pytest.raises(ValueError):
        bernstein_constraints(scn, 0, need, np.eye(3), omega, 1.0, 0.1, 2.0, scale=0.0)


def test_bernstein_constraints_symbolic_needs_trace_bound():
    ps = cp.Variable(3, nonneg=True)
    with pytest.raises(ValueError):
        bernstein_constraints(_single_uav(), 0, 1.0, ps[0] * np.eye(3), 1.0, 1.0, 0.05, 2.0)
    c = bernstein_constraints(_single_uav(), 0, 1.0, ps[0] * np.eye(3), 1.0, 1.0, 0.05, 2.0, trace_bound=cp.Variable())
    assert c.spread is None
    assert len(c.as_list()) == 2


def test_sca_linearize_at_expansion_point(spd):
    j0 = spd(np.random.default_rng(0))
    f1, omega_lin, f2 = sca_linearize(j0, cp.Constant(j0), 2.0, 2.0)
    j0_inv = np.linalg.inv(j0)
    assert f1.value == pytest.approx(np.trace(j0_inv @ j0_inv))
    np.testing.assert_allclose(omega_lin.value, j0_inv, atol=1e-12)
    assert f2 == pytest.approx(4.0)


@pytest.mark.parametrize("seed", range(5))
def test_sca_linearize_is_first_order(spd, seed):
    gen = np.random.default_rng(seed)
    j0 = spd(gen)
    direction = spd(gen) - spd(gen)
    errors = []
    for eps in (1e-2, 1e-3):
        j = j0 + eps * direction
        j_inv = np.linalg.inv(j)
        f1, omega_lin, _ = sca_linearize(j0, cp.Constant(j), 1.0, 1.0)
        errors.append((abs(f1.value - np.trace(j_inv @ j_inv)), np.linalg.norm(omega_lin.value - j_inv)))
    # second-order remainders shrink by 100x when the step shrinks by 10x
    assert errors[1][0] <= errors[0][0] / 50 + 1e-15
    assert errors[1][1] <= errors[0][1] / 50 + 1e-15


@pytest.mark.parametrize("seed", range(5))
def test_sca_surrogates_are_minorants(spd, seed):
    gen = np.random.default_rng(seed)
    j0, j = spd(gen), spd(gen)
    f1, _, f2 = sca_linearize(j0, cp.Constant(j), 1.5, 0.7)
    j_inv = np.linalg.inv(j)
    assert f1.value <= np.trace(j_inv @ j_inv) + 1e-12
    assert f2 <= 0.7 ** 2


def test_sca_left_grouping_on_commuting_steps(spd):
    j0 = spd(np.random.default_rng(4))
    j = 1.01 * j0
    _, fast, _ = sca_linearize(j0, cp.Constant(j), 1.0, 1.0)
    _, literal, _ = sca_linearize(j0, cp.Constant(j), 1.0, 1.0, left_grouping=True)
    np.testing.assert_allclose(fast.value, literal.value, rtol=1e-12, atol=1e-14)


def test_sca_linearize_singular_point():
    with pytest.raises(ValueError):
        sca_linearize(np.diag([1.0, 1.0, 0.0]), cp.Constant(np.eye(3)), 1.0, 1.0)


def test_restore_hits_the_budget(scenario, config):
    terms = system_terms(scenario, config.rate_floor)
    eta = outage_exponent(0.05)
    sensing, comm, t = restore(terms, np.ones(3), eta, config.budget)
    assert sensing.sum() + comm.sum() <= config.budget
    assert sensing.sum() + comm.sum() == pytest.approx(config.budget, rel=1e-9)
    alloc = PowerAllocation(sensing=sensing, comm=comm)
    assert np.all(bernstein_certificate(scenario, alloc, 0.05, config.rate_floor) <= 1e-6)
    assert restore(terms, np.ones(3), eta, 0.05) is None


######################################
# Worst-case CVaR
######################################


@pytest.mark.filterwarnings("error:You didn.t specify the order:FutureWarning",
                            "error:Conversion of an array with ndim:DeprecationWarning")
def test_constraint_builders_stay_warning_free():
    scn = _single_uav()
    p_c, lam, chi = cp.Variable(nonneg=True), cp.Variable(nonneg=True), cp.Variable()
    m = cp.Variable((4, 4), symmetric=True)
    assert ellipsoid_lmi(scn, 0, p_c, np.eye(3), lam, 1.0, 2.0).shape == (4, 4)
    assert len(cvar_constraints(scn, 0, p_c, np.eye(3), m, chi, 0.05, 2.0)) == 3
    assert worst_case_cvar([[0.0]], [1.0], 1.0, [0.0], [[1.0]], 0.1) == pytest.approx(1.0 + sqrt(9.0), rel=1e-5)


def test_moment_matrix_identity():
    np.testing.assert_allclose(moment_matrix(np.eye(3)), np.eye(4))
    np.testing.assert_allclose(moment_matrix(np.diag([2.0, 4.0, 8.0])), np.diag([0.5, 0.25, 0.125, 1.0]))


def test_cvar_constraints_reject_zero_multiplier():
    scn = _single_uav()
    cons = cvar_constraints(scn, 0, 1.0, np.eye(3), np.zeros((4, 4)), 0.0, 0.05, 2.0)
    assert len(cons) == 3
    assert cons[0].value()
    assert not cons[1].value()
    assert cons[2].value()


@pytest.mark.parametrize("b, sigma, eps", [(1.0, 1.0, 0.05), (-2.0, 0.5, 0.1), (0.3, 3.0, 0.2)])
def test_worst_case_cvar_linear_loss(b, sigma, eps):
    # one-sided Chebyshev: the worst CVaR of b xi is |b| sigma sqrt((1 - eps) / eps)
    tail = abs(b) * sigma * sqrt((1 - eps) / eps)
    value = worst_case_cvar([[0.0]], [b], -tail, [0.0], [[sigma ** 2]], eps)
    assert value == pytest.approx(0.0, abs=1e-5 * (1 + tail))
    value = worst_case_cvar([[0.0]], [b], 1.0, [0.0], [[sigma ** 2]], eps)
    assert value == pytest.approx(1.0 + tail, rel=1e-5)


def _discrete_cvar(losses, probs, eps):
    # the minimizing threshold sits on an atom
    return min(chi + np.sum(probs * np.maximum(losses - chi, 0.0)) / eps for chi in losses)


@pytest.mark.parametrize("mix", [1.0, 0.5, 0.2, 0.05])
def test_worst_case_cvar_dominates_three_point_laws(mix):
    quad, lin, const, sigma, eps = 0.7, -1.3, -2.0, 1.5, 0.1
    s = sigma / sqrt(mix)
    atoms = np.array([-s, 0.0, s])
    probs = np.array([mix / 2, 1 - mix, mix / 2])
    losses = quad * atoms ** 2 + lin * atoms + const
    worst = worst_case_cvar([[quad]], [lin], const, [0.0], [[sigma ** 2]], eps)
    assert worst >= _discrete_cvar(losses, probs, eps) - 1e-6


def test_linearized_trace_at_expansion_point():
    d0 = moment_matrix(np.diag([1.0, 2.0, 3.0]))
    x0 = np.diag([1.0, 2.0, 3.0, 1.0])
    m = np.random.default_rng(0).normal(size=(4, 4))
    m = m @ m.T
    for grouping in (False, True):
        value = linearized_trace(d0, cp.Constant(x0), x0, m, grouping)
        assert value.value == pytest.approx(np.trace(d0 @ m))


######################################
# Full runs
######################################


def test_budget_below_rate_floors(scenario):
    config = AllocatorConfig(rate_floor=2.0, total_power=0.1)
    for scheme in ("nonrobust",) + ROBUST:
        with pytest.raises(BudgetInfeasibleError):
            allocate(scheme, scenario, config, robustness_model(scheme, 1.0, 0.05))


@pytest.mark.parametrize("scheme", ("nonrobust",) + ROBUST)
def test_single_uav_is_geometry_infeasible(scheme):
    scn = Scenario.create([[0, 100, 100]], [0, 0, 0], 0.1, 5e6, 1e-9)
    with pytest.raises(GeometryInfeasibleError):
        allocate(scheme, scn, AllocatorConfig(rate_floor=2.0, total_power=1.0), robustness_model(scheme, 1.0, 0.05))


@pytest.mark.slow
def test_nonrobust_closed_form(solved, scenario, config):
    alloc, trace = solved("nonrobust")
    terms = system_terms(scenario, config.rate_floor)
    np.testing.assert_allclose(alloc.comm, terms.distance_sq / terms.gamma)
    # symmetric layout: the leftover budget splits evenly
    expected = (config.budget - alloc.comm.sum()) / 3
    np.testing.assert_allclose(alloc.sensing, np.full(3, expected), rtol=1e-6)
    assert trace.stop_reason == "tolerance"
    assert len(trace) == 1


@pytest.mark.slow
@pytest.mark.parametrize("scheme", ("nonrobust",) + ROBUST)
def test_allocation_respects_budget(solved, config, scheme):
    alloc, trace = solved(scheme)
    assert alloc.total <= config.total_power
    assert np.all(alloc.sensing >= 0) and np.all(alloc.comm >= 0)
    assert trace.stop_reason in ("tolerance", "no_descent", "budget")
    assert 1 <= trace.iterations <= config.max_iters


@pytest.mark.slow
@pytest.mark.parametrize("scheme", ROBUST)
def test_objective_never_increases(solved, scheme):
    _, trace = solved(scheme)
    objectives = trace.objectives
    for before, after in zip(objectives, objectives[1:]):
        assert after <= before * (1 + 1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("scheme", ROBUST)
def test_robust_schemes_pay_for_robustness(solved, scenario, config, scheme):
    terms = system_terms(scenario, config.rate_floor)
    baseline, _ = solved("nonrobust")
    alloc, _ = solved(scheme)
    assert np.all(alloc.comm > baseline.comm)
    assert crb(terms.fim(alloc.sensing)) >= crb(terms.fim(baseline.sensing)) * (1 - 1e-6)


@pytest.mark.slow
def test_gaussian_model_is_cheaper_than_moment_model(solved):
    # knowing the law beats knowing only its first two moments
    assert np.all(solved("bi-sca")[0].comm <= solved("cvar-ao")[0].comm)


@pytest.mark.slow
def test_bisca_lenient_outage_approaches_nonrobust(solved):
    baseline, _ = solved("nonrobust")
    alloc, _ = solved("bi-sca", p_out=0.99)
    np.testing.assert_allclose(alloc.comm, baseline.comm, rtol=0.05)
    assert np.all(alloc.comm >= baseline.comm)


@pytest.mark.slow
def test_sao_certifies_every_uav(solved, scenario, config):
    alloc, _ = solved("s-ao")
    terms = system_terms(scenario, config.rate_floor)
    j = terms.fim(alloc.sensing)
    for k in range(3):
        _, worst = worst_case_lse(scenario, k, j, 1.0)
        assert worst <= terms.gamma[k] * alloc.comm[k] * (1 + 1e-9)


@pytest.mark.slow
def test_sao_symmetric_layout(solved):
    alloc, trace = solved("s-ao")
    np.testing.assert_allclose(alloc.sensing, alloc.sensing.mean(), rtol=1e-4)
    np.testing.assert_allclose(alloc.comm, alloc.comm.mean(), rtol=1e-4)
    assert all("lambda_s" in record.aux for record in trace.records)


@pytest.mark.slow
def test_sao_tiny_ellipsoid_approaches_nonrobust(solved):
    baseline, _ = solved("nonrobust")
    alloc, _ = solved("s-ao", delta=1e-6)
    assert alloc.sensing.sum() == pytest.approx(baseline.sensing.sum(), rel=1e-3)
    np.testing.assert_allclose(alloc.comm, baseline.comm, rtol=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("p_out", [0.05, 0.1])
def test_bisca_certificate(solved, scenario, config, p_out):
    alloc, trace = solved("bi-sca", p_out=p_out)
    assert np.all(bernstein_certificate(scenario, alloc, p_out, config.rate_floor) <= 1e-6)
    for record in trace.records:
        assert {"omega", "rho", "ray_scale", "surrogate"} <= set(record.aux)


@pytest.mark.slow
def test_cvarao_trace_keeps_multipliers(solved):
    _, trace = solved("cvar-ao")
    for record in trace.records:
        assert len(record.aux["M"]) == 3
        assert "fim" not in record.aux


@pytest.mark.slow
@pytest.mark.parametrize("scheme", ("nonrobust",) + ROBUST)
def test_crb_falls_with_budget(solved, scenario, config, scheme):
    terms = system_terms(scenario, config.rate_floor)
    bounds = [crb(terms.fim(solved(scheme, total_power=p)[0].sensing)) for p in (0.5, 1.0, 2.0)]
    assert bounds[0] > bounds[1] > bounds[2]


@pytest.mark.slow
@pytest.mark.parametrize("scheme", ("nonrobust",) + ROBUST)
def test_crb_rises_with_rate_floor(solved, scenario, config, scheme):
    terms = system_terms(scenario, config.rate_floor)
    bounds = [crb(terms.fim(solved(scheme, rate_floor=r)[0].sensing)) for r in (1.0, 1.5, 2.0, 2.5)]
    for lower, higher in zip(bounds, bounds[1:]):
        assert higher >= lower * (1 - 1e-9)


@pytest.mark.slow
def test_asymmetric_layout_runs(random_scenario):
    scn = random_scenario(7, num_uavs=4)
    config = AllocatorConfig(rate_floor=1.0, total_power=2.0, max_iters=10)
    for scheme in ROBUST:
        alloc, trace = allocate(scheme, scn, config, robustness_model(scheme, 1.0, 0.1))
        assert alloc.total <= config.total_power
        assert len(trace) >= 1


@pytest.mark.slow
def test_triangle_with_explicit_start():
    scn = Scenario.create(triangle(radius=60.0, altitude=80.0), [0, 0, 0], 0.1, 5e6, 1e-9)
    config = AllocatorConfig(rate_floor=2.0, total_power=1.0, initial_sensing=[0.1, 0.2, 0.3], max_iters=10)
    alloc, _ = allocate("cvar-ao", scn, config, ArbitraryMoments(0.05))
    assert alloc.total <= config.total_power
