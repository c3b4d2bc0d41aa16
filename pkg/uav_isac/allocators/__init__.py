from typing import Tuple

from ..geometry import Scenario
from .base import (AllocatorConfig, ArbitraryMoments, Ellipsoid, Gaussian, IterationRecord, IterationTrace,
                   PowerAllocation, RobustnessModel, SystemTerms, gamma, system_terms)
from .ellipsoid import ellipsoid_lmi, solve_sao
from .gaussian import (BernsteinConstraints, bernstein_certificate, bernstein_constraints, exact_omega,
                       outage_exponent, sca_linearize, solve_bisca)
from .moments import cvar_constraints, linearized_trace, moment_matrix, solve_cvarao, worst_case_cvar
from .nonrobust import nonrobust_allocate, solve_nonrobust

SCHEMES = {
    "nonrobust": (lambda scenario, config, model: nonrobust_allocate(scenario, config), None),
    "s-ao": (lambda scenario, config, model: solve_sao(scenario, config, model.delta), Ellipsoid),
    "bi-sca": (lambda scenario, config, model: solve_bisca(scenario, config, model.p_out), Gaussian),
    "cvar-ao": (lambda scenario, config, model: solve_cvarao(scenario, config, model.p_out), ArbitraryMoments),
}


def robustness_model(scheme: str, delta: float, p_out: float) -> RobustnessModel:
    """The LSE model a scheme hedges against; nonrobust is verified against the Gaussian one."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {list(SCHEMES)}")
    model = SCHEMES[scheme][1] or Gaussian
    return model(delta) if model is Ellipsoid else model(p_out)


def allocate(scheme: str, scenario: Scenario, config: AllocatorConfig,
             robustness: RobustnessModel = None) -> Tuple[PowerAllocation, IterationTrace]:
    """
    Runs one allocation scheme.

    Arguments:
        - scheme: One of `SCHEMES`.
        - scenario: Scenario.
        - config: AllocatorConfig.
        - robustness: LSE model matching the scheme; ignored by nonrobust.

    Returns:
        - (PowerAllocation, IterationTrace).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {list(SCHEMES)}")
    run, model = SCHEMES[scheme]
    if model is not None and not isinstance(robustness, model):
        raise TypeError(f"{scheme} needs a {model.__name__} robustness model, got {robustness!r}")
    return run(scenario, config, robustness)


__all__ = (
    'AllocatorConfig', 'ArbitraryMoments', 'BernsteinConstraints', 'Ellipsoid', 'Gaussian', 'IterationRecord',
    'IterationTrace', 'PowerAllocation', 'RobustnessModel', 'SCHEMES', 'SystemTerms', 'allocate',
    'bernstein_certificate', 'bernstein_constraints', 'cvar_constraints', 'ellipsoid_lmi', 'exact_omega', 'gamma',
    'linearized_trace', 'moment_matrix', 'nonrobust_allocate', 'outage_exponent', 'robustness_model',
    'sca_linearize', 'solve_bisca', 'solve_cvarao', 'solve_nonrobust', 'solve_sao', 'system_terms',
    'worst_case_cvar',
)
