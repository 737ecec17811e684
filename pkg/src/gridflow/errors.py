"""Exception hierarchy shared by the gridflow modules."""


class GridflowError(Exception):
    """Base class for every domain error raised by gridflow."""


class FeederError(GridflowError, ValueError):
    """A feeder description could not be turned into a valid model.

    ``path`` points at the offending location (``"branches[3].to"``), or is
    empty when the problem concerns the whole document.
    """

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class FeederSyntaxError(FeederError):
    pass


class FeederSchemaError(FeederError):
    pass


class FeederSemanticError(FeederError):
    def __init__(self, message, path="", diagnostics=()):
        self.diagnostics = list(diagnostics)
        super().__init__(message, path)


class SingularMatrixError(GridflowError, ValueError):
    pass


class CorruptStructureError(GridflowError, ValueError):
    pass


class ZeroDiagonalError(GridflowError, ValueError):
    pass


class UndervoltageError(GridflowError, ArithmeticError):
    pass
