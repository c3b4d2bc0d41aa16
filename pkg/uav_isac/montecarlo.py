"""
montecarlo.py

Seeded samplers for the three LSE models and the empirical checks built on
them: outage fractions of an allocation and moment audits of a batch.

Every family of the moment model has mean 0 and covariance exactly J_p^{-1}:

    gaussian            J^{-1/2} z,           z ~ N(0, I)
    uniform-ellipsoid   sqrt(5) J^{-1/2} x,   x uniform in the unit ball (cov I/5)
    rademacher-mixture  J^{-1/2} r,           r_i = +-1 with probability 1/2

The ellipsoid family draws sqrt(delta) J^{-1/2} x, so every sample lies in
{du^T J du <= delta}; `boundary=True` puts the samples on its surface.
"""

from dataclasses import dataclass
from math import sqrt
from typing import Optional, Tuple

import numpy as np
import torch
from torch import Tensor

from .allocators import ArbitraryMoments, Ellipsoid, Gaussian, PowerAllocation, RobustnessModel
from .channel import rate
from .fisher import crb
from .geometry import Scenario

FAMILIES = ("ellipsoid", "gaussian", "uniform-ellipsoid", "rademacher-mixture")
MOMENT_FAMILIES = ("gaussian", "uniform-ellipsoid", "rademacher-mixture")
# rates this far below the floor still count as meeting it
RATE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LseSampler:
    """
    Arguments:
        - model: RobustnessModel the samples are drawn under.
        - fim: (3, 3) positive definite J_p shaping the ellipsoid or covariance.
        - seed: Seed of a fresh torch.Generator per call.
        - family: One of FAMILIES; defaults to `ellipsoid` for Ellipsoid and `gaussian` otherwise.
    """
    model: RobustnessModel
    fim: Tensor
    seed: int = 0
    family: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "fim", torch.as_tensor(self.fim, dtype=torch.float64))
        crb(self.fim)
        family = self.family or ("ellipsoid" if isinstance(self.model, Ellipsoid) else "gaussian")
        allowed = {Ellipsoid: ("ellipsoid",), Gaussian: ("gaussian",), ArbitraryMoments: MOMENT_FAMILIES}
        if family not in allowed[type(self.model)]:
            raise ValueError(f"family {family!r} does not fit a {type(self.model).__name__} model, "
                             f"expected one of {allowed[type(self.model)]}")
        object.__setattr__(self, "family", family)

    def inv_sqrt(self) -> Tensor:
        lam, vecs = torch.linalg.eigh(self.fim)
        return (vecs / torch.sqrt(lam)) @ vecs.T


def _unit_ball(n: int, generator: torch.Generator, surface: bool = False) -> Tensor:
    """Uniform in the unit ball: normalized Gaussian direction times U^{1/3}."""
    x = torch.randn(n, 3, generator=generator, dtype=torch.float64)
    x = x / torch.linalg.norm(x, dim=-1, keepdim=True)
    if surface:
        return x
    return x * torch.rand(n, 1, generator=generator, dtype=torch.float64) ** (1 / 3)


def sample(sampler: LseSampler, n: int, boundary: bool = False) -> Tensor:
    """
    Draws a batch of LSEs.

    Arguments:
        - sampler: LseSampler.
        - n: Batch size, at least 1.
        - boundary: Ellipsoid family only; sample the surface du^T J du = delta.

    Returns:
        - Tensor of shape `(n, 3)`; identical for identical (sampler, n, boundary).
    """
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    if boundary and sampler.family != "ellipsoid":
        raise ValueError("boundary sampling needs the ellipsoid family")
    generator = torch.Generator().manual_seed(sampler.seed)
    shape = sampler.inv_sqrt()

    if sampler.family == "ellipsoid":
        x = sqrt(sampler.model.delta) * _unit_ball(n, generator, surface=boundary)
    elif sampler.family == "gaussian":
        x = torch.randn(n, 3, generator=generator, dtype=torch.float64)
    elif sampler.family == "uniform-ellipsoid":
        x = sqrt(5) * _unit_ball(n, generator)
    else:
        x = 2.0 * torch.randint(0, 2, (n, 3), generator=generator, dtype=torch.float64) - 1.0
    return x @ shape.T


@dataclass(frozen=True)
class OutageReport:
    """
    Arguments:
        - fraction: Per-UAV share of samples with rate < R_bar, shape `(K,)`.
        - stderr: Binomial standard error of each fraction.
        - samples: Batch size.
    """
    fraction: np.ndarray
    stderr: np.ndarray
    samples: int

    @property
    def worst(self) -> float:
        return float(self.fraction.max())


def empirical_outage(scenario: Scenario, allocation: PowerAllocation, samples: Tensor,
                     rate_floor: float) -> OutageReport:
    """Per-UAV empirical outage of an allocation over a batch of LSEs."""
    samples = torch.as_tensor(samples, dtype=torch.float64).reshape(-1, 3)
    n = samples.shape[0]
    if n == 0:
        raise ValueError("empty LSE batch")
    fraction = np.array([
        float((rate(scenario, k, float(allocation.comm[k]), samples) < rate_floor - RATE_TOL).double().mean())
        for k in range(scenario.num_uavs)
    ])
    return OutageReport(fraction=fraction, stderr=np.sqrt(fraction * (1 - fraction) / n), samples=n)


def outage_margin(p_out: float, n: int, sigmas: float = 3.0) -> float:
    """sigmas * sqrt(p_out (1 - p_out) / n), the binomial allowance above p_out."""
    return sigmas * sqrt(p_out * (1 - p_out) / n)


def moment_audit(samples: Tensor, fim) -> Tuple[float, float]:
    """(||mean||, ||cov - J^{-1}||_F / ||J^{-1}||_F) of a batch."""
    samples = torch.as_tensor(samples, dtype=torch.float64)
    target = torch.linalg.inv(torch.as_tensor(fim, dtype=torch.float64))
    mean = samples.mean(dim=0)
    centered = samples - mean
    cov = centered.T @ centered / (samples.shape[0] - 1)
    return float(torch.linalg.norm(mean)), float(torch.linalg.norm(cov - target) / torch.linalg.norm(target))
