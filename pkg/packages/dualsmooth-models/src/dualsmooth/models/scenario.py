from typing import Annotated, Literal

from dualsmooth.models.noise import NoiseSpec
from dualsmooth.models.penalty import PenaltySpec
from dualsmooth.models.solver import SolverOptions
from dualsmooth.models.system import SystemSpec
from pydantic import BaseModel, ConfigDict, Field, model_validator


class FileMeasurements(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Literal["file"] = "file"
    path: str = Field(..., description="CSV with header t,z_0,...; relative to the scenario file")


class SimulatedMeasurements(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Literal["simulate"] = "simulate"
    seed: int | None = Field(None, ge=0, description="Simulation seed; defaults to the scenario seed")


class InlineMeasurements(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Literal["inline"] = "inline"
    values: list[list[float]] = Field(..., description="T+1 rows of n_z measurements")


MeasurementSource = Annotated[
    FileMeasurements | SimulatedMeasurements | InlineMeasurements,
    Field(discriminator="source"),
]


class Scenario(BaseModel):
    """A complete smoothing experiment: system, penalties, data and solver settings."""

    model_config = ConfigDict(extra="forbid")

    name: str | None = Field(None, description="Free-form scenario label")
    system: SystemSpec
    process_penalty: PenaltySpec | list[PenaltySpec] = Field(
        ..., description="f_t: one spec for every step or T+1 specs"
    )
    measurement_penalty: PenaltySpec | list[PenaltySpec] = Field(
        ..., description="g_t: one spec for every step or T+1 specs"
    )
    process_noise: NoiseSpec | None = Field(None, description="Noise model for simulated process noise")
    measurement_noise: NoiseSpec | None = Field(None, description="Noise model for simulated measurement noise")
    measurements: MeasurementSource = Field(default_factory=SimulatedMeasurements)
    solver: SolverOptions = Field(default_factory=SolverOptions)
    output_dir: str = Field("out", description="Directory receiving CSV and JSON outputs")
    seed: int = Field(0, ge=0, description="Base seed for every randomized step of the scenario")

    @model_validator(mode="after")
    def validate_sources(self) -> "Scenario":
        if self.measurements.source == "simulate" and (self.process_noise is None or self.measurement_noise is None):
            raise ValueError("simulated measurements require process_noise and measurement_noise")
        steps = self.system.horizon + 1
        for name in ("process_penalty", "measurement_penalty"):
            spec = getattr(self, name)
            if isinstance(spec, list) and len(spec) not in (1, steps):
                raise ValueError(f"{name} must hold 1 or {steps} entries, got {len(spec)}")
        if self.measurements.source == "inline" and len(self.measurements.values) != steps:
            raise ValueError(f"inline measurements must hold {steps} rows")
        return self

    def penalty_specs(self, name: str) -> list[PenaltySpec]:
        spec = getattr(self, name)
        steps = self.system.horizon + 1
        if isinstance(spec, list):
            return spec * steps if len(spec) == 1 else list(spec)
        return [spec] * steps
