"""
scenario.py

The immutable world description every other module reads from.
"""

from dataclasses import dataclass, field, replace
from math import pi, sqrt
from typing import Optional, Sequence

import torch
from torch import Tensor

from ..errors import InvalidGeometryError
from .aod import aod, as_points
from .arrays import array_response, upa_layout

LIGHTSPEED = 299792458.0


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    UAV positions, antenna layouts, UE estimate and radio constants.

    Arguments:
        - uav_positions: Tensor of shape `(K, 3)`, meters.
        - antenna_offsets: K tensors of shape `(3, N_t)`, element positions relative to p_k.
        - ue_estimate: Tensor of shape `(3,)`, meters.
        - wavelength: Carrier wavelength, meters.
        - effective_bandwidth: RMS bandwidth beta of the pilot, Hz.
        - noise_psd: N_0, W/Hz.
        - lightspeed: c, m/s.
        - phase_shifts: Tensor of shape `(K,)`, radians.
        - beamformers: K complex unit-norm tensors of shape `(N_t,)`.
    """
    uav_positions: Tensor
    antenna_offsets: tuple
    ue_estimate: Tensor
    wavelength: float
    effective_bandwidth: float
    noise_psd: float
    lightspeed: float = LIGHTSPEED
    phase_shifts: Optional[Tensor] = None
    beamformers: tuple = field(default=())

    def __post_init__(self):
        k = self.uav_positions.shape[0]
        if self.uav_positions.ndim != 2 or self.uav_positions.shape[-1] != 3 or k < 1:
            raise ValueError(f"uav_positions must have shape (K, 3) with K >= 1, got {tuple(self.uav_positions.shape)}")
        for name in ("wavelength", "effective_bandwidth", "noise_psd", "lightspeed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if len(self.antenna_offsets) != k or len(self.beamformers) != k:
            raise ValueError(f"expected {k} antenna layouts and beamformers, "
                             f"got {len(self.antenna_offsets)} and {len(self.beamformers)}")
        if self.phase_shifts is None or self.phase_shifts.shape != (k,):
            raise ValueError(f"phase_shifts must have shape ({k},)")
        for i, (q, w) in enumerate(zip(self.antenna_offsets, self.beamformers)):
            if q.ndim != 2 or q.shape[0] != 3 or w.shape != (q.shape[1],):
                raise ValueError(f"UAV {i}: offsets must be (3, N_t) and the beamformer (N_t,)")
            if abs(torch.linalg.norm(w).item() - 1.0) > 1e-9:
                raise ValueError(f"UAV {i}: beamformer must have unit norm, got {torch.linalg.norm(w).item():.12f}")
        gaps = torch.linalg.norm(self.ue_estimate - self.uav_positions, dim=-1)
        if bool((gaps == 0).any()):
            raise InvalidGeometryError(f"UE estimate coincides with UAV {int(torch.argmin(gaps))}")

    @property
    def num_uavs(self) -> int:
        return self.uav_positions.shape[0]

    @classmethod
    def create(
            cls,
            uav_positions,
            ue_estimate,
            wavelength: float,
            effective_bandwidth: float,
            noise_psd: float,
            lightspeed: float = LIGHTSPEED,
            antenna_offsets: Optional[Sequence] = None,
            phase_shifts=None,
            beamformers: Optional[Sequence] = None,
        ) -> "Scenario":
        """
        Builds a scenario, filling in defaults: a 4x4 half-wavelength UPA per
        UAV, zero phase shifts, and conjugate-matched beamformers
        `w_k = a_k / sqrt(N_t)` steered toward the UE estimate.
        """
        positions = as_points(uav_positions).reshape(-1, 3)
        ue = as_points(ue_estimate).reshape(3)
        k = positions.shape[0]

        if antenna_offsets is None:
            antenna_offsets = [upa_layout(4, 4, wavelength / 2)] * k
        offsets = tuple(as_points(q) for q in antenna_offsets)

        phases = torch.zeros(k, dtype=torch.float64) if phase_shifts is None else as_points(phase_shifts).reshape(k)

        if beamformers is None:
            beamformers = [
                array_response(q, aod(p, ue), wavelength) / sqrt(q.shape[1])
                for p, q in zip(positions, offsets)
            ]
        weights = tuple(torch.as_tensor(w, dtype=torch.complex128) for w in beamformers)

        return cls(
            uav_positions=positions,
            antenna_offsets=offsets,
            ue_estimate=ue,
            wavelength=float(wavelength),
            effective_bandwidth=float(effective_bandwidth),
            noise_psd=float(noise_psd),
            lightspeed=float(lightspeed),
            phase_shifts=phases,
            beamformers=weights,
        )

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def steering(self, k: int) -> Tensor:
        """Estimated steering vector a_k toward the UE estimate, shape `(N_t,)`."""
        return array_response(self.antenna_offsets[k], aod(self.uav_positions[k], self.ue_estimate), self.wavelength)

    def offset(self, k: int) -> Tensor:
        """The vector u_hat - p_k, shape `(3,)`."""
        return self.ue_estimate - self.uav_positions[k]

    def path_gain(self) -> float:
        """The constant lambda / (4 pi) of the free-space amplitude."""
        return self.wavelength / (4 * pi)
