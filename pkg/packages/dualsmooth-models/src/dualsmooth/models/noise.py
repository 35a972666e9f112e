from dualsmooth.models.enums import NoiseKind
from dualsmooth.models.system import Matrix
from pydantic import BaseModel, ConfigDict, Field, model_validator


class NoiseSpec(BaseModel):
    """Distribution of a per-step noise vector used when simulating scenarios."""

    model_config = ConfigDict(extra="forbid")

    kind: NoiseKind = Field(..., description="gaussian, laplace or none")
    covariance: Matrix | None = Field(None, description="Covariance of a gaussian noise vector")
    scale: float | None = Field(None, gt=0, description="Scale s of independent Laplace(0, s) coordinates")
    dimension: int | None = Field(None, ge=1, description="Vector dimension; inferred from covariance if omitted")

    @model_validator(mode="after")
    def validate_parameters(self) -> "NoiseSpec":
        if self.kind == NoiseKind.GAUSSIAN:
            if self.covariance is None:
                raise ValueError("gaussian noise requires a covariance")
            size = len(self.covariance)
            if any(len(row) != size for row in self.covariance):
                raise ValueError("covariance must be square")
            if self.dimension is not None and self.dimension != size:
                raise ValueError(f"dimension {self.dimension} does not match covariance size {size}")
        elif self.kind == NoiseKind.LAPLACE and self.scale is None:
            raise ValueError("laplace noise requires a scale")
        return self

    def resolved_dimension(self, default: int) -> int:
        if self.covariance is not None:
            return len(self.covariance)
        return self.dimension if self.dimension is not None else default
