"""
aod.py

Angles of departure from a UAV toward the (estimated) UE position.

Spherical parameterization:
    - `azimuth` measured in the x-y plane from the x-axis, in `(-pi, pi]`.
    - `elevation` measured from the z-axis, in `[0, pi]`.

    - Euclidean vectors:
        - `d = [sin(el) cos(az), sin(el) sin(az), cos(el)]` with `||d|| = 1`.

All functions broadcast over leading batch dimensions and compute in float64.
"""

from dataclasses import dataclass
from math import pi

import torch
from torch import Tensor

from ..errors import InvalidGeometryError


def as_points(x) -> Tensor:
    """
    Converts array-like input to a float64 tensor.

    Arguments:
        - x: Array-like of shape `(..., 3)`.

    Returns:
        - Tensor of shape `(..., 3)`.
    """
    return torch.as_tensor(x, dtype=torch.float64)


@dataclass(frozen=True, eq=False)
class Aod:
    """
    Azimuth/elevation pair, possibly batched.

    Arguments:
        - azimuth: Tensor of shape `(...)` in `(-pi, pi]`.
        - elevation: Tensor of shape `(...)` in `[0, pi]`.
    """
    azimuth: Tensor
    elevation: Tensor

    def direction(self) -> Tensor:
        """Unit vector of shape `(..., 3)` pointing along the angles."""
        return spherical_to_euclid(torch.stack(torch.broadcast_tensors(self.elevation, self.azimuth), dim=-1))


def spherical_to_euclid(g: Tensor) -> Tensor:
    """
    Converts (elevation, azimuth) coordinates to euclidean unit vectors.

    Arguments:
        - g: Tensor of shape `(..., 2)`.

    Returns:
        - Tensor of shape `(..., 3)`.
    """
    x = g.new_empty((*g.shape[:-1], 3))

    el = g[..., 0]
    az = g[..., 1]

    x[..., 0] = torch.sin(el) * torch.cos(az)
    x[..., 1] = torch.sin(el) * torch.sin(az)
    x[..., 2] = torch.cos(el)

    return x


def euclid_to_spherical(x: Tensor) -> Tensor:
    """
    Converts non-zero euclidean vectors to (elevation, azimuth) coordinates.

    The azimuth of a vertical vector is 0 by convention, and -pi is folded
    onto +pi so the azimuth lies in `(-pi, pi]`.

    Arguments:
        - x: Tensor of shape `(..., 3)`, not necessarily normalized.

    Returns:
        - Tensor of shape `(..., 2)`.
    """
    g = x.new_empty((*x.shape[:-1], 2))

    horizontal = (x[..., 0] == 0) & (x[..., 1] == 0)
    az = torch.atan2(x[..., 1], x[..., 0])
    az = torch.where(az <= -pi, az + 2 * pi, az)

    g[..., 0] = torch.atan2(torch.hypot(x[..., 0], x[..., 1]), x[..., 2])
    g[..., 1] = torch.where(horizontal, torch.zeros_like(az), az)

    return g


def aod(source, target) -> Aod:
    """
    Angle of departure from `source` toward `target`.

    Arguments:
        - source: Array-like of shape `(..., 3)`, e.g. a UAV position p_k.
        - target: Array-like of shape `(..., 3)`, e.g. the UE estimate.

    Returns:
        - Aod with batch shape `(...)`.
    """
    delta = as_points(target) - as_points(source)
    if bool((torch.linalg.norm(delta, dim=-1) == 0).any()):
        raise InvalidGeometryError("source and target coincide; the angle of departure is undefined")
    g = euclid_to_spherical(delta)
    return Aod(azimuth=g[..., 1], elevation=g[..., 0])


def wavevector(angles: Aod, wavelength: float) -> Tensor:
    """
    Wavevector `(2 pi / lambda) d(theta)`.

    Arguments:
        - angles: Aod with batch shape `(...)`.
        - wavelength: Carrier wavelength in meters.

    Returns:
        - Tensor of shape `(..., 3)` with norm `2 pi / lambda`.
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    return (2 * pi / wavelength) * angles.direction()
