"""
errors.py

Exception hierarchy shared by the library and the command line. Every
exception carries enough context to diagnose a failed run: the
infeasibility family keeps the last feasible allocation and the iteration
trace next to the message.
"""

from typing import Any, Optional

import numpy as np


class IsacError(Exception):
    """Root of all errors raised by uav_isac."""


class InvalidGeometryError(IsacError, ValueError):
    """Two points that must differ coincide (UAV and UE, or UAV and perturbed UE)."""


class ScenarioFileError(IsacError):
    """
    Scenario file failed validation.

    Arguments:
        - path: Dotted key path of the offending entry, e.g. `radio.noise_psd`.
        - message: What is wrong with it.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class InfeasibleError(IsacError):
    """
    Base of all infeasibility outcomes.

    Arguments:
        - message: Human-readable diagnosis.
        - allocation: Last feasible PowerAllocation, if any.
        - trace: IterationTrace up to the failure, if any.
    """

    def __init__(self, message: str, allocation: Any = None, trace: Any = None):
        super().__init__(message)
        self.allocation = allocation
        self.trace = trace


class GeometryInfeasibleError(InfeasibleError):
    """The UAV directions cannot make J_p positive definite."""


class RankDeficientGeometryError(GeometryInfeasibleError):
    """
    J_p is singular or ill-conditioned.

    Arguments:
        - message: Human-readable diagnosis.
        - subspace: (3, r) orthonormal basis of the directions carrying no information.
    """

    def __init__(self, message: str, subspace: Optional[np.ndarray] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.subspace = subspace


class BudgetInfeasibleError(InfeasibleError):
    """The rate floors cannot be met within the total power budget."""


class ScaInfeasibleError(InfeasibleError):
    """
    A BI-SCA surrogate was infeasible.

    Arguments:
        - linearization_point: Sensing powers the surrogate was built at.
    """

    def __init__(self, message: str, linearization_point: Optional[np.ndarray] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.linearization_point = linearization_point


class NumericalFailureError(IsacError):
    """
    A conic solve ended in numerical failure.

    Arguments:
        - message: Diagnosis including the iteration context.
        - report: The SolveReport of the failed solve.
        - allocation: Last feasible PowerAllocation, if any.
        - trace: IterationTrace up to the failure, if any.
    """

    def __init__(self, message: str, report: Any = None, allocation: Any = None, trace: Any = None):
        super().__init__(message)
        self.report = report
        self.allocation = allocation
        self.trace = trace
