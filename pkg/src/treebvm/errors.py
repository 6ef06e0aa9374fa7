"""Exception hierarchy shared by all modules."""


class TreeBvmError(Exception):
    """Base class for every error raised by the package."""


class NonSquareGrid(TreeBvmError, ValueError):
    pass


class UnknownTruthFamily(TreeBvmError, KeyError):
    pass


class UnknownWeightFamily(TreeBvmError, KeyError):
    pass


class EmptyCell(TreeBvmError, ValueError):
    pass


class TooShallowData(TreeBvmError, ValueError):
    pass


class BadDimension(TreeBvmError, ValueError):
    pass


class LengthMismatch(TreeBvmError, ValueError):
    pass


class DimensionMismatch(TreeBvmError, ValueError):
    pass


class EnumerationCapExceeded(TreeBvmError, RuntimeError):
    pass


class MissingTruth(TreeBvmError, ValueError):
    pass


class NumericalFailure(TreeBvmError, ArithmeticError):
    pass


class ConfigInvalid(TreeBvmError, ValueError):
    """Configuration failed validation.

    ``diagnostics`` holds one ``"path: message"`` string per problem.
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class WrongWeight(TreeBvmError, ValueError):
    pass


class TooFewDraws(TreeBvmError, ValueError):
    pass


class InvalidPrior(TreeBvmError, ValueError):
    pass
