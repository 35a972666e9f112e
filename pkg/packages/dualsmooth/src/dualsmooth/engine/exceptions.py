INPUT_ERROR = 2
NUMERICAL_ERROR = 1


class BaseError(Exception):
    """Base class for application errors."""

    code = "APPLICATION_ERROR"

    def __init__(
        self,
        detail: str,
        exit_code: int = INPUT_ERROR,
        error_code: str | None = None,
        context: dict | None = None,
    ):
        self.detail = detail
        self.exit_code = exit_code
        self.error_code = error_code or self.code
        self.context = context
        super().__init__(detail)


class DimensionMismatchError(BaseError):
    """Raised when array shapes disagree with the system dimensions."""

    code = "DIMENSION_MISMATCH"

    def __init__(self, what: str, expected: tuple, actual: tuple):
        super().__init__(
            f"{what} has shape {actual}, expected {expected}",
            context={"expected": list(expected), "actual": list(actual)},
        )


class InvalidPenaltyError(BaseError):
    """Raised when a penalty is not proper, convex and lower semicontinuous."""

    code = "INVALID_PENALTY"


class InvalidNoiseError(BaseError):
    """Raised for noise models that cannot be sampled (e.g. indefinite covariance)."""

    code = "INVALID_NOISE"


class ScenarioError(BaseError):
    """Raised for scenario files that parse but cannot be assembled."""

    code = "SCENARIO_ERROR"


class DegenerateSampleError(BaseError):
    """Raised when a sample cannot support a log-concave density fit."""

    code = "DEGENERATE_SAMPLE"


class ConvergenceError(BaseError):
    code = "NOT_CONVERGED"

    def __init__(self, detail: str, context: dict | None = None):
        super().__init__(detail, exit_code=NUMERICAL_ERROR, context=context)


class SingularSystemError(BaseError):
    """Raised when a linear system of the direct solver is singular."""

    code = "SINGULAR_SYSTEM"

    def __init__(self, detail: str, context: dict | None = None):
        super().__init__(detail, exit_code=NUMERICAL_ERROR, context=context)


class NonDifferentiableConjugateError(BaseError):
    """Raised when the conjugate subdifferential at a point is not a singleton."""

    code = "NON_DIFFERENTIABLE_CONJUGATE"

    def __init__(self, detail: str, step: int | None = None):
        context = {"time_step": step} if step is not None else None
        super().__init__(detail, exit_code=NUMERICAL_ERROR, context=context)


class UndefinedGapError(BaseError):
    code = "UNDEFINED_GAP"

    def __init__(self, detail: str = "duality gap is undefined: primal is +inf and dual is -inf"):
        super().__init__(detail, exit_code=NUMERICAL_ERROR)
