"""Exception and warning types shared across the package."""

from __future__ import annotations


class PhmclarError(Exception):
    """Base class for all library errors."""


class InvalidModel(PhmclarError):
    """A model parameter set violates one of its invariants."""


class DimensionMismatch(PhmclarError):
    """An input vector or matrix has the wrong shape for the model."""


class ShapeMismatch(PhmclarError):
    """Paired inputs (truth/prediction) disagree in shape."""


class EmptyInput(PhmclarError):
    """An operation received an empty collection where data is required."""


class TooLarge(PhmclarError):
    """A brute-force enumeration would exceed its path-count cap."""


class InvalidConfig(PhmclarError):
    """An experiment or CLI configuration fails validation."""


class NumericFailure(PhmclarError):
    """Base class for data/model combinations with zero probability."""


class ZeroLabelMass(NumericFailure):
    """Label constraints are inconsistent with the transition matrix."""


class ZeroLikelihood(NumericFailure):
    """Some observation is impossible under every admissible state."""


class NoAdmissiblePath(NumericFailure):
    """No state path consistent with the labels has positive probability."""


class AllSequencesZeroLikelihood(NumericFailure):
    """Every training sequence has zero likelihood; the fit cannot proceed."""


class InitFailed(NumericFailure):
    """Every EM restart aborted; no usable starting point was found."""


class StarvedStateWarning(UserWarning):
    """A state received no posterior mass; its transition row was reset."""


class SingularDesignWarning(UserWarning):
    """A weighted regression was singular and was ridge-regularized."""
