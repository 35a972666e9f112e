from dualsmooth.models.enums import CertificateStatus, CheckStatus, TerminationReason
from pydantic import BaseModel, ConfigDict, Field


class SolutionSummary(BaseModel):
    """Scalar diagnostics of a solve, written next to the state CSVs."""

    model_config = ConfigDict(ser_json_inf_nan="strings")

    method: str = Field(..., description="Solver that produced the estimate")
    horizon: int
    state_dim: int
    primal_value: float
    dual_value: float
    gap: float
    iterations: int = 0
    converged: bool
    termination: TerminationReason | None = None
    certificate: CertificateStatus | None = None


class CheckResult(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="strings")

    name: str
    status: CheckStatus
    value: float | None = Field(None, description="Measured discrepancy")
    tolerance: float | None = Field(None, description="Threshold the discrepancy is compared with")
    detail: str | None = None


class VerificationReport(BaseModel):
    scenario: str
    checks: list[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.status != CheckStatus.FAIL for check in self.checks)


class DensitySummary(BaseModel):
    sample_size: int
    knot_count: int
    support: tuple[float, float]
    integral: float
    max_log_density: float


class ConvergenceRecord(BaseModel):
    """One row of the convergence trace."""

    model_config = ConfigDict(ser_json_inf_nan="strings")

    iteration: int
    primal_value: float
    dual_value: float
    gap: float
    best_gap: float = Field(..., description="Smallest gap seen so far; nonincreasing along the trace")
    residual: float = Field(..., description="Relative fixed-point residual of the iteration")
