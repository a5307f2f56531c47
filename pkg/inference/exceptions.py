class GgmError(Exception):
    """Base error; ``exit_code`` is what the ``ggm`` command exits with."""

    exit_code = 1


class InputError(GgmError, ValueError):
    exit_code = 2


class ObservationFormatError(InputError):
    pass


class DimensionMismatchError(InputError):
    pass


class InvalidParameterError(InputError):
    pass


class GoldStandardError(InputError):
    pass


class UndefinedAucError(InputError):
    pass


class NumericalError(GgmError, ArithmeticError):
    exit_code = 3


class UnstableLaplacianError(NumericalError):
    pass


class IndeterminateStabilityError(NumericalError):
    pass


class SingularMatrixError(NumericalError):
    pass


class NotDiagonallyDominantError(NumericalError):
    def __init__(self, message, alpha):
        super().__init__(message)
        self.alpha = alpha


class LinearProgramError(NumericalError):
    pass


class SimulationDivergenceError(NumericalError):
    pass


class NotAProjectionError(NumericalError):
    pass


class NotALaplacianError(NumericalError):
    pass


class DisconnectedGraphError(NumericalError):
    pass


class NotInFamilyError(NumericalError):
    pass


class MissingBoundDataError(NumericalError):
    pass
