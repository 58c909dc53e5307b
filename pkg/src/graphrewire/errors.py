"""Exception hierarchy shared by every module."""


class RewireError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class GraphError(RewireError, ValueError):
    pass


class DisconnectedGraphError(GraphError):
    def __init__(self, msg="disconnected graph"):
        super().__init__(msg)


class ConvergenceError(RewireError, ArithmeticError):
    pass


class ShapeError(RewireError, ValueError):
    pass


class EigenvalueCrossingError(RewireError, ArithmeticError):
    def __init__(self, msg="eigenvalue crossing"):
        super().__init__(msg)


class CollapsedEmbeddingError(RewireError, ArithmeticError):
    def __init__(self, msg="collapsed embedding"):
        super().__init__(msg)


class TrainingDivergedError(RewireError, ArithmeticError):
    pass


class BoundViolationError(RewireError, AssertionError):
    pass


class FormatError(RewireError, ValueError):
    pass


class DataIOError(RewireError, OSError):
    pass
