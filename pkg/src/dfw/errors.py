"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures
onto a small set of process exit categories.
"""

EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


class DFWError(Exception):
    exit_code = 1


# data / schema problems
class DataError(DFWError):
    exit_code = EXIT_DATA


class ShapeMismatchError(DataError):
    pass


class EmptyArmError(DataError):
    pass


class TreatmentCodingError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class SchemaError(DataError):
    pass


class CountError(DataError):
    pass


class MissingRealizationError(DataError):
    pass


class MissingCounterfactualError(DataError):
    pass


class EmptyGroupError(DataError):
    pass


class InsufficientReplicationsError(DataError):
    pass


class ConfigError(DataError):
    pass


# numerical problems
class NumericalError(DFWError):
    exit_code = EXIT_NUMERICAL


class ConvergenceError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class NonFiniteObjectiveError(NumericalError):
    pass


class IllConditionedError(NumericalError):
    pass


class ZeroWeightError(NumericalError):
    pass


class DegenerateWeightsError(NumericalError):
    pass


class ZeroPooledVarianceError(NumericalError):
    pass


class ZeroMeanError(NumericalError):
    pass
