"""Exception hierarchy shared by every pipeline stage.

Three bases partition failures by CLI exit code: data problems (exit 2),
configuration problems (exit 3) and numerical failures (exit 4).
"""


class PseudosurvError(Exception):
    exit_code = 1


class DataError(PseudosurvError):
    """The input data violates a documented invariant."""

    exit_code = 2


class ConfigError(PseudosurvError):
    """Flags, config files or requested settings are contradictory."""

    exit_code = 3


class NumericError(PseudosurvError):
    """A numerical routine failed to produce a finite, converged result."""

    exit_code = 4


# dataset
class MissingColumnError(DataError):
    pass


class DuplicateIdError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class NonFiniteCellError(DataError):
    pass


class EmptyTableError(DataError):
    pass


class InvalidLabelError(DataError):
    pass


class NonPositiveTimeError(DataError):
    pass


class InvalidEventCellError(DataError):
    pass


class InvalidSpecError(ConfigError):
    pass


# preprocess
class EmptyInputError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class ClassTooSmallError(DataError):
    pass


class InvalidFractionError(ConfigError):
    pass


# pca
class TooFewRowsError(DataError):
    pass


class TooManyComponentsError(ConfigError):
    pass


# classifiers
class SingleClassTrainingError(DataError):
    pass


class NonFiniteInputError(DataError):
    pass


class LengthMismatchError(DataError):
    pass


class EmptyGridError(ConfigError):
    pass


# ssl engine
class MissingAuxiliaryError(ConfigError):
    pass


class FoldMismatchError(ConfigError):
    pass


# survival
class NoEventsError(DataError):
    pass


class TooFewEventsError(DataError):
    pass


class NonConvergenceError(NumericError):
    pass


class EmptyGroupError(DataError):
    pass


class NoComparablePairsError(DataError):
    pass


# stats
class TooFewSamplesError(DataError):
    pass


class TooFewPairsError(DataError):
    pass
