"""Matsubara frequency grids and Brillouin-zone quadratures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import HBAR, K_BOLTZMANN
from .geometry import UnitCell

__all__ = ["MatsubaraGrid", "BZQuadrature", "matsubara_xi"]


def matsubara_xi(T: float, l: int) -> float:
    """xi_l = 2 pi l k_B T / hbar in rad/s."""
    return 2.0 * np.pi * l * K_BOLTZMANN * T / HBAR


@dataclass(frozen=True, eq=False)
class MatsubaraGrid:
    """Thermal frequencies xi_l = 2 pi l k_B T/hbar, l = 0..l_max.

    The l = 0 term carries weight 1/2 (primed-sum convention); all other
    weights are 1.
    """

    temperature: float
    l_max: int

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.l_max < 0:
            raise ValueError("l_max must be >= 0")

    @property
    def xis(self):
        ls = np.arange(self.l_max + 1)
        return 2.0 * np.pi * ls * K_BOLTZMANN * self.temperature / HBAR

    @property
    def weights(self):
        w = np.ones(self.l_max + 1)
        w[0] = 0.5
        return w

    def xi(self, l: int) -> float:
        return matsubara_xi(self.temperature, l)


@dataclass(frozen=True, eq=False)
class BZQuadrature:
    """Gauss-Legendre product rule over the first Brillouin zone.

    nodes_per_dim Legendre nodes per direction, mapped to
    [-pi/Lx, pi/Lx] x [-pi/Ly, pi/Ly]; weights sum to the zone area
    (2 pi/Lx)(2 pi/Ly).
    """

    nodes_per_dim: int
    cell: UnitCell

    def __post_init__(self):
        if self.nodes_per_dim < 1:
            raise ValueError("nodes_per_dim must be >= 1")

    @property
    def num_nodes(self):
        return self.nodes_per_dim ** 2

    def nodes(self):
        """(kx, ky, w) arrays of the flattened 2D rule, x-major order."""
        x, wx = np.polynomial.legendre.leggauss(self.nodes_per_dim)
        bx, by = np.pi / self.cell.Lx, np.pi / self.cell.Ly
        kxs, wkx = bx * x, bx * wx
        kys, wky = by * x, by * wx
        kx = np.repeat(kxs, self.nodes_per_dim)
        ky = np.tile(kys, self.nodes_per_dim)
        w = np.repeat(wkx, self.nodes_per_dim) * np.tile(wky, self.nodes_per_dim)
        return kx, ky, w
