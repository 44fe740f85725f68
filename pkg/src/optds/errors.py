"""Exception hierarchy.

``DataError`` subclasses describe bad input (CLI exit code 2);
``NumericalError`` subclasses describe a numerical breakdown of an estimator.
"""


class OptDSError(Exception):
    pass


class DataError(OptDSError, ValueError):
    pass


class NumericalError(OptDSError, ArithmeticError):
    pass


class DuplicateLabelError(DataError):
    def __init__(self, worker, item):
        self.worker, self.item = worker, item
        super().__init__(f"duplicate label for worker {worker}, item {item}")


class LabelOutOfRangeError(DataError):
    def __init__(self, worker, item, label, k=None):
        self.worker, self.item, self.label = worker, item, label
        bound = f" (k={k})" if k is not None else ""
        super().__init__(
            f"label {label} of worker {worker} on item {item} out of range{bound}"
        )


class EmptyDatasetError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InvalidConfigError(DataError):
    pass


class InvalidRhoError(DataError):
    pass


class TooFewWorkersError(DataError):
    pass


class ZeroEntryError(NumericalError):
    pass


class ZeroProbabilityError(NumericalError):
    pass


class IllConditionedMomentsError(NumericalError):
    def __init__(self, sigma_min, message=None):
        self.sigma_min = sigma_min
        super().__init__(
            message or f"cross-moment matrix ill-conditioned (sigma_k={sigma_min:.3e})"
        )


class NotPositiveDefiniteError(NumericalError):
    pass


class NoOverlapError(DataError):
    def __init__(self, a, b):
        self.a, self.b = a, b
        super().__init__(f"workers {a} and {b} share no labeled item")


class DegeneratePairError(NumericalError):
    pass


class NonConvergenceWarning(RuntimeWarning):
    pass
