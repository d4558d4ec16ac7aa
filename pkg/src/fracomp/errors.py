"""Exception types raised across the package."""


class FracompError(ValueError):
    """Base class for all domain errors."""


# spectral
class EmptyWaveform(FracompError):
    pass


class NonPositiveSamplePeriod(FracompError):
    pass


class FmaxBelowFundamental(FracompError):
    pass


class SpectraMismatch(FracompError):
    pass


class ZeroMeanFlow(FracompError):
    pass


class ZeroImpedanceHarmonic(FracompError):
    pass


class ZeroFlowHarmonicWarning(UserWarning):
    """Emitted when a flow harmonic is too small to divide by and gets dropped."""


# foc / models
class NonPositiveFrequency(FracompError):
    pass


class UndefinedHysteresivity(FracompError):
    pass


class UnknownModel(FracompError):
    pass


class WrongParameterCount(FracompError):
    pass


class NonPositiveParameter(FracompError):
    pass


# fitting / metrics
class TooFewHarmonics(FracompError):
    pass


class ZeroNormalizer(FracompError):
    pass


class NonPositiveRmse(FracompError):
    pass


class DegenerateSampleSize(FracompError):
    pass


class LengthMismatch(FracompError):
    pass


class ZeroDataModulus(FracompError):
    pass


# population
class ParseError(FracompError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class InconsistentWaveLengths(FracompError):
    pass


class DivergentCompliance(FracompError):
    pass


# analysis
class EmptyInput(FracompError):
    pass


class DegenerateVariance(FracompError):
    pass


class MissingMetadata(FracompError):
    pass
