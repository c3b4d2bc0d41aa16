"""
arrays.py

Uniform planar arrays and their far-field response.
"""

import torch
from torch import Tensor

from .aod import Aod, as_points, wavevector


def upa_layout(rows: int, cols: int, spacing: float) -> Tensor:
    """
    Element offsets of a `rows x cols` uniform planar array in the x-y plane,
    centered at the origin. Rows run along x, columns along y.

    Arguments:
        - rows: Number of elements along x.
        - cols: Number of elements along y.
        - spacing: Inter-element spacing in meters.

    Returns:
        - Tensor of shape `(3, rows * cols)`.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"array needs at least one row and column, got {rows}x{cols}")
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")

    x = (torch.arange(rows, dtype=torch.float64) - (rows - 1) / 2) * spacing
    y = (torch.arange(cols, dtype=torch.float64) - (cols - 1) / 2) * spacing
    gx, gy = torch.meshgrid(x, y, indexing="ij")

    return torch.stack((gx.reshape(-1), gy.reshape(-1), torch.zeros(rows * cols, dtype=torch.float64)))


def array_response(offsets, angles: Aod, wavelength: float) -> Tensor:
    """
    Steering vector `a(theta)` with elements `exp(j q_m^T kappa(theta))`.

    Arguments:
        - offsets: Array-like of shape `(3, N_t)`.
        - angles: Aod with batch shape `(...)`.
        - wavelength: Carrier wavelength in meters.

    Returns:
        - Complex tensor of shape `(..., N_t)`.
    """
    # phase: [..., N_t]
    phase = wavevector(angles, wavelength) @ as_points(offsets)
    return torch.polar(torch.ones_like(phase), phase)
