"""
fisher.py

ToA-based location Fisher information

    J_p = sum_k (8 pi^2 beta^2 / (c^2 N_0)) P_{s,k} |h_k^H w_k|^2 Psi(theta_k),

its Cramer-Rao bound tr(J_p^{-1}), and an independent evaluation of J_p
through the full channel-parameter transform (tau_k, Re alpha_k, Im alpha_k)
-> (u, Re alpha_k, Im alpha_k) followed by a Schur complement.

The channel gain |h_k^H w_k|^2 is taken from the estimated channel; the
true one is unknown when powers are allocated.
"""

from dataclasses import dataclass
from math import pi
from typing import Optional, Union

import numpy as np
import torch
from torch import Tensor

from .channel import channel_estimate
from .errors import RankDeficientGeometryError
from .geometry import Aod, Scenario, aod

# reciprocal condition number below which J_p counts as singular
RCOND_MIN = 1e-10


@dataclass(frozen=True, eq=False)
class FisherInfo:
    """
    Location-related FIM and its CRB.

    Arguments:
        - matrix: Tensor of shape `(3, 3)`, 1/m^2.
        - crb: tr(J_p^{-1}) in m^2, None when J_p is not invertible.
    """
    matrix: Tensor
    crb: Optional[float] = None


@dataclass(frozen=True, eq=False)
class SensingGain:
    """
    Arguments:
        - coefficient: Tensor of shape `(K,)`, c_k in 1/m^2 (linear in P_s).
        - alpha: Complex tensor of shape `(K,)`, alpha_k = h_k^H w_k.
    """
    coefficient: Tensor
    alpha: Tensor


def _powers(p_s, num_uavs: int) -> Tensor:
    p_s = torch.as_tensor(p_s, dtype=torch.float64).reshape(-1)
    if p_s.shape != (num_uavs,):
        raise ValueError(f"expected {num_uavs} sensing powers, got {p_s.shape[0]}")
    if bool((p_s < 0).any()):
        raise ValueError("sensing powers must be non-negative")
    return p_s


def psi(angles: Aod) -> Tensor:
    """
    Direction matrix Psi(theta), written out element by element.

    Arguments:
        - angles: Aod with batch shape `(...)`.

    Returns:
        - Tensor of shape `(..., 3, 3)`, equal to d d^T for the unit direction d.
    """
    se, ce = torch.sin(angles.elevation), torch.cos(angles.elevation)
    sa, ca = torch.sin(angles.azimuth), torch.cos(angles.azimuth)
    se, ce, sa, ca = torch.broadcast_tensors(se, ce, sa, ca)

    m = se.new_empty((*se.shape, 3, 3))
    m[..., 0, 0] = se ** 2 * ca ** 2
    m[..., 1, 1] = se ** 2 * sa ** 2
    m[..., 2, 2] = ce ** 2
    m[..., 0, 1] = m[..., 1, 0] = se ** 2 * sa * ca
    m[..., 0, 2] = m[..., 2, 0] = se * ce * ca
    m[..., 1, 2] = m[..., 2, 1] = se * ce * sa

    return m


def unit_coefficients(scenario: Scenario) -> Tensor:
    """Per-watt coefficients 8 pi^2 beta^2 |alpha_k|^2 / (c^2 N_0), shape `(K,)`."""
    est = channel_estimate(scenario)
    alpha = torch.stack([torch.vdot(h, w) for h, w in zip(est.h_hat, scenario.beamformers)])
    prefactor = 8 * pi ** 2 * scenario.effective_bandwidth ** 2 / (scenario.lightspeed ** 2 * scenario.noise_psd)
    return prefactor * torch.abs(alpha) ** 2


def sensing_gain(scenario: Scenario, p_s) -> SensingGain:
    est = channel_estimate(scenario)
    alpha = torch.stack([torch.vdot(h, w) for h, w in zip(est.h_hat, scenario.beamformers)])
    return SensingGain(coefficient=_powers(p_s, scenario.num_uavs) * unit_coefficients(scenario), alpha=alpha)


def fim_basis(scenario: Scenario) -> Tensor:
    """
    Per-watt FIM contributions G_k, so that J_p = sum_k P_{s,k} G_k.

    Returns:
        - Tensor of shape `(K, 3, 3)`.
    """
    angles = aod(scenario.uav_positions, scenario.ue_estimate)
    return unit_coefficients(scenario)[:, None, None] * psi(angles)


def fim(scenario: Scenario, p_s) -> FisherInfo:
    """
    Location-related FIM for the given sensing powers.

    Arguments:
        - scenario: Scenario.
        - p_s: Array-like of shape `(K,)`, W.

    Returns:
        - FisherInfo; `crb` is None when J_p is singular.
    """
    matrix = torch.einsum("k,kij->ij", _powers(p_s, scenario.num_uavs), fim_basis(scenario))
    try:
        bound = crb(matrix)
    except RankDeficientGeometryError:
        bound = None
    return FisherInfo(matrix=matrix, crb=bound)


def fim_from_channel_parameters(scenario: Scenario, p_s) -> Tensor:
    """
    J_p through the channel-parameter transform.

    The unknowns eta = [tau_k, Re alpha_k, Im alpha_k]_k carry the block
    diagonal FIM J_eta = blkdiag(Phi_k), Phi_k = diag(8 pi^2 P_{s,k} |alpha_k|^2
    beta^2 / N_0, 2 / N_0, 2 / N_0). The Jacobian Upsilon = d eta / d eta~
    toward eta~ = [u, Re alpha_k, Im alpha_k] stacks U_k = [d tau_k / du, 0]
    over T_k = [[0, 1, 0], [0, 0, 1]], and J_p is the Schur complement of
    the alpha block in Upsilon J_eta Upsilon^T.

    Returns:
        - Tensor of shape `(3, 3)`.
    """
    k_total = scenario.num_uavs
    p_s = _powers(p_s, k_total)
    alpha = sensing_gain(scenario, p_s).alpha
    n0, beta, c = scenario.noise_psd, scenario.effective_bandwidth, scenario.lightspeed

    j_eta = torch.zeros(3 * k_total, 3 * k_total, dtype=torch.float64)
    upsilon = torch.zeros(3 + 2 * k_total, 3 * k_total, dtype=torch.float64)
    for k in range(k_total):
        phi = torch.diag(torch.stack([
            8 * pi ** 2 * p_s[k] * torch.abs(alpha[k]) ** 2 * beta ** 2 / n0,
            torch.tensor(2 / n0, dtype=torch.float64),
            torch.tensor(2 / n0, dtype=torch.float64),
        ]))
        j_eta[3 * k:3 * k + 3, 3 * k:3 * k + 3] = phi

        offset = scenario.offset(k)
        upsilon[:3, 3 * k] = offset / (c * torch.linalg.norm(offset))
        upsilon[3 + 2 * k, 3 * k + 1] = 1.0
        upsilon[4 + 2 * k, 3 * k + 2] = 1.0

    j_tilde = upsilon @ j_eta @ upsilon.T
    a, b, d = j_tilde[:3, :3], j_tilde[:3, 3:], j_tilde[3:, 3:]
    return a - b @ torch.linalg.solve(d, b.T)


def crb(fisher: Union[FisherInfo, Tensor, np.ndarray]) -> float:
    """
    Cramer-Rao bound tr(J_p^{-1}).

    Raises RankDeficientGeometryError, carrying the uninformative
    directions, when the reciprocal condition number falls below RCOND_MIN.
    """
    matrix = fisher.matrix if isinstance(fisher, FisherInfo) else fisher
    lam, vecs = torch.linalg.eigh(torch.as_tensor(matrix, dtype=torch.float64))
    top = lam[-1].item()
    if top <= 0 or lam[0].item() < RCOND_MIN * top:
        weak = lam < RCOND_MIN * max(top, 0.0) if top > 0 else torch.ones_like(lam, dtype=torch.bool)
        subspace = vecs[:, weak].numpy()
        raise RankDeficientGeometryError(
            f"J_p is rank deficient (eigenvalues {lam.tolist()}); "
            f"no information along {np.round(subspace.T, 6).tolist()}",
            subspace=subspace,
        )
    return float(torch.sum(1 / lam))
