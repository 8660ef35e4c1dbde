"""Shared geometry builders and reference materials for the test suite."""

import numpy as np
import pytest

from caspar.geometry import Inclusion, LayerSpec, LayerStack, UnitCell
from caspar.materials import preset


@pytest.fixture(scope="session")
def vacuum():
    return preset("vacuum")


@pytest.fixture(scope="session")
def gold():
    return preset("gold_drude")


@pytest.fixture(scope="session")
def doped_si():
    return preset("silicon_pdoped")


def plane_stack(material, cell, gap=None):
    """Half-space body: gap | material, no layers."""
    gap = gap if gap is not None else preset("vacuum")
    return LayerStack(cell=cell, incident_halfspace=gap, layers=(),
                      exit_halfspace=material)


def lamellar_layer(cell, tooth_material, filling, depth,
                   background=None):
    """1D grating layer: tooth strip centered in the cell, full y extent."""
    background = background if background is not None else preset("vacuum")
    wx = filling * cell.Lx
    return LayerSpec(
        thickness=depth, background=background,
        inclusions=(Inclusion(material=tooth_material,
                              x0=0.5 * (cell.Lx - wx), y0=0.0,
                              wx=wx, wy=cell.Ly),))


def sample_b_stack(cell=None, gap=None):
    """Deep-etched 1D doped-Si grating: period 400 nm, depth 1070 nm,
    filling 0.478, bulk doped-Si substrate."""
    cell = cell if cell is not None else UnitCell(400e-9, 400e-9)
    si = preset("silicon_pdoped")
    layer = lamellar_layer(cell, si, 0.478, 1070e-9)
    gap = gap if gap is not None else preset("vacuum")
    return LayerStack(cell=cell, incident_halfspace=gap, layers=(layer,),
                      exit_halfspace=si)


def sample_a_stack(gap=None):
    """1D doped-Si grating: period 1000 nm, depth 980 nm, filling 0.510."""
    cell = UnitCell(1000e-9, 1000e-9)
    si = preset("silicon_pdoped")
    layer = lamellar_layer(cell, si, 0.510, 980e-9)
    gap = gap if gap is not None else preset("vacuum")
    return LayerStack(cell=cell, incident_halfspace=gap, layers=(layer,),
                      exit_halfspace=si)


def pillar_stack(side_fraction=0.5, depth=1070e-9, period=400e-9, gap=None):
    """2D array of square doped-Si pillars on a doped-Si substrate.

    side_fraction=0.5 gives filling factor 1/4.
    """
    cell = UnitCell(period, period)
    si = preset("silicon_pdoped")
    w = side_fraction * period
    layer = LayerSpec(
        thickness=depth, background=preset("vacuum"),
        inclusions=(Inclusion(material=si, x0=0.5 * (period - w),
                              y0=0.5 * (period - w), wx=w, wy=w),))
    gap = gap if gap is not None else preset("vacuum")
    return LayerStack(cell=cell, incident_halfspace=gap, layers=(layer,),
                      exit_halfspace=si)


def membrane_stack(hole_fraction=0.5, depth=1070e-9, period=400e-9, gap=None):
    """Free-standing doped-Si membrane with square holes (vacuum below).

    hole_fraction=0.5 gives solid filling factor 3/4.
    """
    cell = UnitCell(period, period)
    si = preset("silicon_pdoped")
    w = hole_fraction * period
    vac = preset("vacuum")
    layer = LayerSpec(
        thickness=depth, background=si,
        inclusions=(Inclusion(material=vac, x0=0.5 * (period - w),
                              y0=0.5 * (period - w), wx=w, wy=w),))
    gap = gap if gap is not None else vac
    return LayerStack(cell=cell, incident_halfspace=gap, layers=(layer,),
                      exit_halfspace=vac)


def random_bloch(rng, cell):
    kx = rng.uniform(-np.pi / cell.Lx, np.pi / cell.Lx)
    ky = rng.uniform(-np.pi / cell.Ly, np.pi / cell.Ly)
    return kx, ky
