"""Exception hierarchy shared by all solver stages."""


class CasparError(Exception):
    """Base class for all caspar errors."""


class NegativeFrequency(CasparError):
    """Permittivity/permeability requested at xi < 0."""


class ZeroFrequencyPole(CasparError):
    """Permittivity requested at xi = 0 for a model with a conductivity pole."""


class UnknownPreset(CasparError):
    """Material preset name not registered."""


class UnknownMaterial(CasparError):
    """A stack references a material label that is not defined."""


class DimensionMismatch(CasparError):
    """Matrix operands do not share truncation order / index layout."""


class BasisMismatch(CasparError):
    """Two modal bases do not share (xi, k_parallel, truncation)."""


class DegenerateEigenbasis(CasparError):
    """Right-eigenvector matrix of a layer is numerically singular."""


class SingularT22(CasparError):
    """t22 block of an interface transfer matrix is not invertible."""


class ResonantInversion(CasparError):
    """(1 - s21*Sigma12) in the star product is numerically singular."""


class SpectralRadiusExceeded(CasparError):
    """Round-trip operator has spectral radius >= 1 (nonphysical input)."""


class NonConvergedTail(CasparError):
    """Last Matsubara term exceeds the tail tolerance of the accumulated sum."""


class NonConvergedFloor(CasparError):
    """Zero-frequency result depends on the conductivity floor."""


class ExtrapolationUnstable(CasparError):
    """Small-frequency extrapolation residual too large."""


class StepTooCoarse(CasparError):
    """Finite-difference step halving changes the derivative by too much."""


class ParseError(CasparError):
    """Config document is not well formed."""


class ValidationError(CasparError):
    """Config document violates one or more invariants."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
