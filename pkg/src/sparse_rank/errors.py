"""Exception hierarchy shared by all modules."""


class SparseRankError(Exception):
    """Base class for library errors."""


class InvalidSpec(SparseRankError, ValueError):
    pass


class InfeasibleMean(SparseRankError, ValueError):
    pass


class UnsupportedOrder(SparseRankError, ValueError):
    pass


class DegenerateDistribution(SparseRankError, ValueError):
    pass


class NumericFailure(SparseRankError, ArithmeticError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class UnsupportedEnumeration(SparseRankError, ValueError):
    pass


class UnsupportedField(SparseRankError, ValueError):
    pass


class InvalidArgument(SparseRankError, ValueError):
    pass


class InstanceTooLarge(SparseRankError, ValueError):
    pass


class HypothesisFailed(SparseRankError):
    pass


class SamplingFailure(SparseRankError, RuntimeError):
    def __init__(self, message, attempts=None, trial=None):
        super().__init__(message)
        self.attempts = attempts
        self.trial = trial
