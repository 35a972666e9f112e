from pydantic import BaseModel, ConfigDict, Field


class SolverOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_iters: int = Field(50000, ge=1, description="Iteration cap for the primal-dual method")
    tol_gap: float = Field(1e-8, gt=0, description="Relative duality-gap tolerance")
    tol_residual: float = Field(1e-9, gt=0, description="Relative primal/dual residual tolerance")
    tol_step: float = Field(
        1e-10, gt=0, description="Residual the iterates must also reach before a certified gap ends the run"
    )
    step_ratio: float = Field(1.0, gt=0, description="Ratio sigma/tau of dual to primal step")
    theta: float = Field(1.0, ge=0, le=1, description="Over-relaxation parameter")
    seed: int = Field(0, ge=0, description="Seed for the power-iteration start vector")
    check_every: int = Field(10, ge=1, description="Iterations between gap evaluations")
    record_history: bool = Field(True, description="Keep the convergence history on the solution")
