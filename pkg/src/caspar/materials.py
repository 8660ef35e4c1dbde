"""Dispersive material models evaluated at imaginary frequency.

Permittivities are evaluated on the imaginary frequency axis, eps(i*xi),
where they are real and >= 1 for passive media. Metals carry a free-carrier
(Drude) term whose zero-frequency pole defines the DC conductivity
sigma = omega_p**2 / gamma (kept in rad/s like every other frequency).
Evaluating a model with such a pole at xi = 0 is a hard error: the l = 0
Matsubara term must go through the dedicated zero-frequency solver, where
the order of the limits xi -> 0 and sigma -> 0 is taken correctly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NegativeFrequency, UnknownPreset, ZeroFrequencyPole

__all__ = [
    "DielectricModel",
    "Constant",
    "Drude",
    "LorentzPole",
    "Composite",
    "MagneticModel",
    "Material",
    "permittivity_at",
    "dc_conductivity",
    "preset",
    "preset_names",
]


class DielectricModel:
    """Base class; subclasses implement the closed forms."""

    def eps(self, xi: float) -> float:
        raise NotImplementedError

    def sigma_dc(self) -> float:
        """Residue of the zero-frequency pole, omega_p**2/gamma, or 0."""
        return 0.0


@dataclass(frozen=True)
class Constant(DielectricModel):
    """Dispersionless relative permittivity."""

    eps_r: float

    def eps(self, xi):
        return self.eps_r


@dataclass(frozen=True)
class Drude(DielectricModel):
    """Free-carrier metal: eps(i*xi) = 1 + omega_p**2 / (xi*(xi + gamma))."""

    omega_p: float  # plasma frequency, rad/s
    gamma: float    # damping rate, rad/s

    def eps(self, xi):
        if xi == 0.0:
            raise ZeroFrequencyPole(
                "Drude permittivity diverges at xi=0; use dc_conductivity "
                "and the zero-frequency solver instead")
        return 1.0 + self.omega_p**2 / (xi * (xi + self.gamma))

    def sigma_dc(self):
        return self.omega_p**2 / self.gamma


@dataclass(frozen=True)
class LorentzPole(DielectricModel):
    """Single bound-charge resonance at omega_0.

    eps(i*xi) = eps_inf + (eps_static - eps_inf) * omega_0**2 / (xi**2 + omega_0**2)
    """

    eps_static: float
    eps_inf: float
    omega_0: float  # resonance frequency, rad/s

    def eps(self, xi):
        w2 = self.omega_0**2
        return self.eps_inf + (self.eps_static - self.eps_inf) * w2 / (xi**2 + w2)


@dataclass(frozen=True)
class Composite(DielectricModel):
    """Sum of pole contributions: eps = 1 + sum_i (eps_i - 1)."""

    terms: tuple[DielectricModel, ...]

    def __init__(self, terms):
        object.__setattr__(self, "terms", tuple(terms))

    def eps(self, xi):
        return 1.0 + sum(t.eps(xi) - 1.0 for t in self.terms)

    def sigma_dc(self):
        return sum(t.sigma_dc() for t in self.terms)


@dataclass(frozen=True)
class MagneticModel:
    """Relative permeability; only the dispersionless case is supported."""

    mu_r: float = 1.0

    def mu(self, xi: float) -> float:
        return self.mu_r


@dataclass(frozen=True)
class Material:
    """A named (permittivity, permeability) pair used in stack descriptions."""

    permittivity: DielectricModel
    permeability: MagneticModel = field(default_factory=MagneticModel)
    label: str = ""

    def eps(self, xi):
        return permittivity_at(self.permittivity, xi)

    def mu(self, xi):
        return self.permeability.mu(xi)

    def sigma_dc(self):
        return dc_conductivity(self.permittivity)


def permittivity_at(model: DielectricModel, xi: float) -> float:
    """Evaluate eps(i*xi).

    Parameters
    ----------
    model : DielectricModel
    xi : float
        Imaginary frequency in rad/s, >= 0.

    Raises
    ------
    NegativeFrequency
        If xi < 0.
    ZeroFrequencyPole
        If xi == 0 and the model contains a Drude term.
    """
    if xi < 0.0:
        raise NegativeFrequency(f"xi = {xi} must be >= 0")
    return model.eps(xi)


def dc_conductivity(model: DielectricModel) -> float:
    """DC conductivity omega_p**2/gamma summed over Drude terms (rad/s)."""
    return model.sigma_dc()


def _make_presets():
    si = LorentzPole(eps_static=11.87, eps_inf=1.035, omega_0=6.6e15)
    return {
        "vacuum": Material(Constant(1.0), label="vacuum"),
        "gold_drude": Material(
            Drude(omega_p=1.27524e16, gamma=6.59631e13), label="gold_drude"),
        "silicon_intrinsic": Material(si, label="silicon_intrinsic"),
        "silicon_pdoped": Material(
            Composite((si, Drude(omega_p=3.6151e14, gamma=7.868e13))),
            label="silicon_pdoped"),
    }


_PRESETS = _make_presets()


def preset(name: str) -> Material:
    """Return a built-in material by name.

    Known names: vacuum, gold_drude, silicon_intrinsic, silicon_pdoped.
    """
    try:
        return _PRESETS[name]
    except KeyError:
        raise UnknownPreset(
            f"unknown preset {name!r}; known: {sorted(_PRESETS)}") from None


def preset_names():
    return sorted(_PRESETS)
