"""Exception hierarchy shared across the workbench."""


class MetrologyError(Exception):
    """Base class for all workbench errors."""


class ValidationError(MetrologyError):
    """Bad input: malformed files, unknown names, inconsistent shapes."""


class ComputationError(MetrologyError):
    """A well-formed request that cannot be computed (singular matrix, etc.)."""


class ConstantColumnError(ComputationError):
    """A metric has zero variance under the active missing-data policy."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"metric {column!r} is constant (zero variance)")


class MulticollinearityError(ComputationError):
    """Correlation matrix is not positive definite; lists near-duplicate pairs."""

    def __init__(self, pairs):
        self.pairs = list(pairs)
        listing = "; ".join(f"{a!r} ~ {b!r} (r={r:.4f})" for a, b, r in self.pairs)
        detail = listing or "no single pair identified"
        super().__init__(f"correlation matrix is not positive definite: {detail}")


class DegenerateDataError(ComputationError):
    """Agreement coefficient undefined, e.g. every observed rating identical."""


class ConvergenceError(ComputationError):
    """Iterative procedure exhausted its iteration budget."""

    def __init__(self, message, last_delta=None):
        self.last_delta = last_delta
        if last_delta is not None:
            message = f"{message} (last update {last_delta:.3e})"
        super().__init__(message)
