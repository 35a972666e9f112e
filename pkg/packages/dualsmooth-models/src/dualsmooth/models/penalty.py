from typing import Annotated, Literal

from dualsmooth.models.noise import NoiseSpec
from dualsmooth.models.system import Matrix
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class QuadraticSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["quadratic"] = "quadratic"
    M: Matrix = Field(..., description="Symmetric positive semidefinite weight; value is x'Mx/2")

    @field_validator("M", mode="after")
    @classmethod
    def validate_square(cls, v: Matrix) -> Matrix:
        if not v or any(len(row) != len(v) for row in v):
            raise ValueError("M must be a non-empty square matrix")
        return v


class MonitoringSpec(BaseModel):
    """Monitoring function sup_{u in [l, u]} {x'u - u'Mu/2} with diagonal M.

    `null` bounds stand for -inf / +inf.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: Literal["monitoring"] = "monitoring"
    lower: list[float | None] = Field(..., alias="l", description="Lower box bounds (null = -inf)")
    upper: list[float | None] = Field(..., alias="u", description="Upper box bounds (null = +inf)")
    M_diag: list[float] | None = Field(None, description="Diagonal of M (defaults to zeros)")

    @model_validator(mode="after")
    def validate_box(self) -> "MonitoringSpec":
        if not self.lower or len(self.lower) != len(self.upper):
            raise ValueError("l and u must be non-empty and of equal length")
        if self.M_diag is not None:
            if len(self.M_diag) != len(self.lower):
                raise ValueError("M_diag must match the box dimension")
            if any(m < 0 for m in self.M_diag):
                raise ValueError("M_diag entries must be nonnegative")
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo is not None and hi is not None and lo > hi:
                raise ValueError(f"empty box: l[{i}] = {lo} > u[{i}] = {hi}")
        return self


class PiecewiseLinearSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["pwl"] = "pwl"
    knots: list[float] = Field(..., min_length=2, description="Strictly increasing knot locations")
    values: list[float] = Field(..., min_length=2, description="Penalty values at the knots")

    @model_validator(mode="after")
    def validate_knots(self) -> "PiecewiseLinearSpec":
        if len(self.knots) != len(self.values):
            raise ValueError("knots and values must have equal length")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ValueError("knots must be strictly increasing")
        return self


class ZeroSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["zero"] = "zero"
    dimension: int | None = Field(None, ge=1, description="Block dimension; inferred from the system if omitted")


class GaussianSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["gaussian"] = "gaussian"
    covariance: Matrix = Field(..., description="Noise covariance; the penalty weight is its inverse")


class LaplaceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["laplace"] = "laplace"
    scale: float = Field(1.0, gt=0, description="Laplace scale s; penalty is |x|_1 / s")
    dimension: int | None = Field(None, ge=1)


class HuberSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["huber"] = "huber"
    kappa: float = Field(1.0, gt=0, description="Huber threshold")
    dimension: int | None = Field(None, ge=1)


class SampleDraw(BaseModel):
    model_config = ConfigDict(extra="forbid")

    noise: NoiseSpec = Field(..., description="Distribution the calibration sample is drawn from")
    size: int = Field(100, ge=3, description="Sample size")
    seed: int = Field(0, ge=0, description="Seed of the calibration sample")


class LogConcaveMLESpec(BaseModel):
    """Measurement penalty fitted as the log-concave MLE of a 1-D noise sample."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["logconcave_mle"] = "logconcave_mle"
    samples: list[float] | None = Field(None, description="Inline calibration sample")
    samples_path: str | None = Field(None, description="One-column CSV holding the calibration sample")
    sample: SampleDraw | None = Field(None, description="Draw the calibration sample from a noise model")

    @model_validator(mode="after")
    def validate_source(self) -> "LogConcaveMLESpec":
        given = [s for s in (self.samples, self.samples_path, self.sample) if s is not None]
        if len(given) != 1:
            raise ValueError("exactly one of samples, samples_path or sample must be given")
        if self.samples is not None and len(self.samples) < 3:
            raise ValueError("at least 3 samples are required")
        return self


PenaltySpec = Annotated[
    QuadraticSpec
    | MonitoringSpec
    | PiecewiseLinearSpec
    | ZeroSpec
    | GaussianSpec
    | LaplaceSpec
    | HuberSpec
    | LogConcaveMLESpec,
    Field(discriminator="kind"),
]
