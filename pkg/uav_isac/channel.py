"""
channel.py

Line-of-sight channel toward the estimated UE, the CSI error caused by a
location sensing error (LSE) Delta u, and the achievable rate coupling
the two.

Only the distance is perturbed by the LSE: the steering vector stays the
one built from the estimated angle, so

    h_k + dh_k = (lambda e^{j psi_k} / (4 pi ||u_hat + du - p_k||)) a_k.

Functions taking an LSE broadcast over a batch `(..., 3)`.
"""

from dataclasses import dataclass
from math import pi
from typing import Tuple

import numpy as np
import torch
from scipy.optimize import brentq
from torch import Tensor

from .errors import InvalidGeometryError
from .geometry import Scenario
from .geometry.aod import as_points


@dataclass(frozen=True, eq=False)
class ChannelEstimate:
    """
    Estimated channels of all UAVs.

    Arguments:
        - h_hat: K complex tensors of shape `(N_t,)`.
        - distance: Tensor of shape `(K,)`, d_k = ||u_hat - p_k||.
        - gain: Tensor of shape `(K,)`, g_k = |a_k^H w_k|^2 in `[0, N_t]`.
    """
    h_hat: tuple
    distance: Tensor
    gain: Tensor


def _perturbed_distance(scenario: Scenario, k: int, lse) -> Tensor:
    dist = torch.linalg.norm(scenario.offset(k) + as_points(lse), dim=-1)
    if bool((dist == 0).any()):
        raise InvalidGeometryError(f"the perturbed UE position coincides with UAV {k}")
    return dist


def beam_gain(scenario: Scenario, k: int) -> float:
    """g_k = |a_k^H w_k|^2 for the estimated steering vector."""
    return float(torch.abs(torch.vdot(scenario.steering(k), scenario.beamformers[k])) ** 2)


def channel_estimate(scenario: Scenario) -> ChannelEstimate:
    """
    Free-space channel `h_k = (lambda e^{j psi_k} / (4 pi d_k)) a_k` of every UAV.

    Arguments:
        - scenario: Scenario.

    Returns:
        - ChannelEstimate.
    """
    h_hat, distance, gain = [], [], []
    for k in range(scenario.num_uavs):
        a = scenario.steering(k)
        d = torch.linalg.norm(scenario.offset(k))
        rho = scenario.path_gain() * torch.polar(torch.ones((), dtype=torch.float64), scenario.phase_shifts[k]) / d
        h_hat.append(rho * a)
        distance.append(d)
        gain.append(torch.abs(torch.vdot(a, scenario.beamformers[k])) ** 2)

    return ChannelEstimate(h_hat=tuple(h_hat), distance=torch.stack(distance), gain=torch.stack(gain))


def channel_error(scenario: Scenario, k: int, lse) -> Tensor:
    """
    CSI error dh_k induced by the LSE.

    Arguments:
        - scenario: Scenario.
        - k: UAV index.
        - lse: Array-like of shape `(..., 3)`.

    Returns:
        - Complex tensor of shape `(..., N_t)`, exactly zero for du = 0.
    """
    dist = _perturbed_distance(scenario, k, lse)
    d = torch.linalg.norm(scenario.offset(k))
    phase = torch.polar(torch.ones((), dtype=torch.float64), scenario.phase_shifts[k])
    factor = scenario.path_gain() * phase * (1 / dist - 1 / d)
    return factor[..., None] * scenario.steering(k)


def rate(scenario: Scenario, k: int, p_c, lse) -> Tensor:
    """
    Achievable rate `log2(1 + P_c lambda^2 g_k / (16 pi^2 N_0 ||u_hat + du - p_k||^2))`.

    Arguments:
        - scenario: Scenario.
        - k: UAV index.
        - p_c: Communication power in W (float or broadcastable tensor).
        - lse: Array-like of shape `(..., 3)`.

    Returns:
        - Tensor of shape `(...)`, bits/s/Hz.
    """
    if torch.any(torch.as_tensor(p_c) < 0):
        raise ValueError("communication power must be non-negative")
    dist = _perturbed_distance(scenario, k, lse)
    snr = p_c * scenario.wavelength ** 2 * beam_gain(scenario, k) / (16 * pi ** 2 * scenario.noise_psd * dist ** 2)
    return torch.log2(1 + snr)


def rate_from_csi(scenario: Scenario, k: int, p_c, lse) -> Tensor:
    """
    The same rate evaluated from the channel itself, `log2(1 + P_c |(h + dh)^H w|^2 / N_0)`.
    """
    h = channel_estimate(scenario).h_hat[k] + channel_error(scenario, k, lse)
    response = (h.conj() * scenario.beamformers[k]).sum(-1)
    return torch.log2(1 + p_c * torch.abs(response) ** 2 / scenario.noise_psd)


def worst_case_lse(scenario: Scenario, k: int, fim, delta: float) -> Tuple[np.ndarray, float]:
    """
    The LSE inside the ellipsoid `du^T J du <= delta` that pushes the UE
    farthest from UAV k.

    With `du = J^{-1/2} y` the problem is a trust-region maximization of
    `y^T B y + 2 b^T y` over `||y||^2 <= delta` with `B = J^{-1}` and
    `b = J^{-1/2}(u_hat - p_k)`; its solution is `y = (mu I - B)^{-1} b`
    with `mu >= lambda_max(B)` fixed by the secular equation `||y||^2 = delta`.

    Arguments:
        - scenario: Scenario.
        - k: UAV index.
        - fim: (3, 3) positive definite J_p.
        - delta: Ellipsoid size.

    Returns:
        - The worst-case du of shape `(3,)` and the squared distance `||u_hat + du - p_k||^2`.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    a = scenario.offset(k).numpy()
    lam, vecs = np.linalg.eigh(np.asarray(fim, dtype=np.float64))
    if lam[0] <= 0:
        raise ValueError("the ellipsoid shape must be positive definite")

    beta = 1 / lam
    c = np.sqrt(beta) * (vecs.T @ a)
    top = np.argmax(beta)
    rest = beta < beta[top]

    def secular(mu):
        return np.sum(c ** 2 / (mu - beta) ** 2) - delta

    scale = np.linalg.norm(c)
    if np.linalg.norm(c[~rest]) <= 1e-12 * scale and np.sum(c[rest] ** 2 / (beta[top] - beta[rest]) ** 2) <= delta:
        # hard case: the leading eigen-direction takes up the remaining radius
        y = np.zeros(3)
        y[rest] = c[rest] / (beta[top] - beta[rest])
        y[top] = np.sqrt(max(delta - np.sum(y ** 2), 0.0))
    else:
        hi = beta[top] + scale / np.sqrt(delta) + 1e-12 * beta[top]
        lo = beta[top] + (hi - beta[top]) / 2
        while secular(lo) < 0:
            lo = beta[top] + (lo - beta[top]) / 2
        mu = brentq(secular, lo, hi, xtol=1e-15 * hi, rtol=8.9e-16, maxiter=500)
        y = c / (mu - beta)

    du = vecs @ (np.sqrt(beta) * y)
    return du, float(np.sum((a + du) ** 2))
