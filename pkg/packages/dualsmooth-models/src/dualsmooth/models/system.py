from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Matrix = list[list[float]]


def _check_rectangular(matrix: Matrix, name: str) -> Matrix:
    if not matrix or not matrix[0]:
        raise ValueError(f"{name} must be a non-empty matrix")
    width = len(matrix[0])
    if any(len(row) != width for row in matrix):
        raise ValueError(f"{name} rows must all have the same length")
    return matrix


class SystemSpec(BaseModel):
    """Linear time-varying system x_{t+1} = F_t x_t + w_{t+1}, z_t = H_t x_t + v_t.

    A single matrix is broadcast over every time step; otherwise `dynamics`
    must hold exactly `horizon` matrices and `measurement` exactly `horizon + 1`.
    """

    model_config = ConfigDict(extra="forbid")

    horizon: int = Field(..., ge=0, description="Number of steps T; states are indexed 0..T")
    dynamics: Matrix | list[Matrix] = Field(
        default_factory=list, description="F_t (n_x x n_x), one matrix or T matrices"
    )
    measurement: Matrix | list[Matrix] = Field(..., description="H_t (n_z x n_x), one matrix or T+1 matrices")

    @field_validator("dynamics", "measurement", mode="after")
    @classmethod
    def validate_matrices(cls, v, info):
        if v and isinstance(v[0][0], list):
            for matrix in v:
                _check_rectangular(matrix, info.field_name)
        elif v:
            _check_rectangular(v, info.field_name)
        return v

    @model_validator(mode="after")
    def validate_dimensions(self) -> "SystemSpec":
        dynamics = self.dynamics_sequence()
        measurement = self.measurement_sequence()
        state_dim = len(measurement[0][0])
        if any(len(h[0]) != state_dim for h in measurement):
            raise ValueError("measurement matrices must all have n_x columns")
        meas_dim = len(measurement[0])
        if any(len(h) != meas_dim for h in measurement):
            raise ValueError("measurement matrices must all have n_z rows")
        for t, f in enumerate(dynamics):
            if len(f) != state_dim or len(f[0]) != state_dim:
                raise ValueError(f"dynamics[{t}] must be {state_dim}x{state_dim}")
        return self

    def _is_sequence(self, value: Matrix | list[Matrix]) -> bool:
        return bool(value) and isinstance(value[0][0], list)

    def dynamics_sequence(self) -> list[Matrix]:
        if not self.dynamics:
            if self.horizon > 0:
                raise ValueError("dynamics are required when horizon > 0")
            return []
        if not self._is_sequence(self.dynamics):
            return [self.dynamics] * self.horizon
        if len(self.dynamics) == 1:
            return list(self.dynamics) * self.horizon
        if len(self.dynamics) != self.horizon:
            raise ValueError(f"expected {self.horizon} dynamics matrices, got {len(self.dynamics)}")
        return list(self.dynamics)

    def measurement_sequence(self) -> list[Matrix]:
        if not self._is_sequence(self.measurement):
            return [self.measurement] * (self.horizon + 1)
        if len(self.measurement) == 1:
            return list(self.measurement) * (self.horizon + 1)
        if len(self.measurement) != self.horizon + 1:
            raise ValueError(f"expected {self.horizon + 1} measurement matrices, got {len(self.measurement)}")
        return list(self.measurement)

    @property
    def state_dim(self) -> int:
        return len(self.measurement_sequence()[0][0])

    @property
    def meas_dim(self) -> int:
        return len(self.measurement_sequence()[0])
