from enum import Enum


class PenaltyKind(str, Enum):
    QUADRATIC = "quadratic"
    MONITORING = "monitoring"
    PIECEWISE_LINEAR = "pwl"
    ZERO = "zero"


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    NONE = "none"


class CertificateStatus(str, Enum):
    PLQ_AUTOMATIC = "plq-automatic"
    STRICT_FEASIBILITY = "strict-feasibility"
    UNKNOWN = "unknown"


class TerminationReason(str, Enum):
    GAP = "gap"
    RESIDUAL = "residual"
    MAX_ITERS = "max-iters"
    DIVERGED = "diverged"


class CheckStatus(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIP = "SKIP"
