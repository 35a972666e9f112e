from dualsmooth.models.enums import (
    CertificateStatus,
    CheckStatus,
    NoiseKind,
    PenaltyKind,
    TerminationReason,
)
from dualsmooth.models.error import ErrorReport
from dualsmooth.models.noise import NoiseSpec
from dualsmooth.models.penalty import (
    GaussianSpec,
    HuberSpec,
    LaplaceSpec,
    LogConcaveMLESpec,
    MonitoringSpec,
    PenaltySpec,
    PiecewiseLinearSpec,
    QuadraticSpec,
    SampleDraw,
    ZeroSpec,
)
from dualsmooth.models.results import (
    CheckResult,
    ConvergenceRecord,
    DensitySummary,
    SolutionSummary,
    VerificationReport,
)
from dualsmooth.models.scenario import (
    FileMeasurements,
    InlineMeasurements,
    MeasurementSource,
    Scenario,
    SimulatedMeasurements,
)
from dualsmooth.models.solver import SolverOptions
from dualsmooth.models.system import Matrix, SystemSpec

__all__ = [
    # Enums
    "CertificateStatus",
    "CheckStatus",
    "NoiseKind",
    "PenaltyKind",
    "TerminationReason",
    # System
    "Matrix",
    "SystemSpec",
    # Noise
    "NoiseSpec",
    # Penalties
    "QuadraticSpec",
    "MonitoringSpec",
    "PiecewiseLinearSpec",
    "ZeroSpec",
    "GaussianSpec",
    "LaplaceSpec",
    "HuberSpec",
    "LogConcaveMLESpec",
    "SampleDraw",
    "PenaltySpec",
    # Scenario
    "FileMeasurements",
    "SimulatedMeasurements",
    "InlineMeasurements",
    "MeasurementSource",
    "Scenario",
    # Solver
    "SolverOptions",
    # Results
    "SolutionSummary",
    "CheckResult",
    "ConvergenceRecord",
    "VerificationReport",
    "DensitySummary",
    # Error
    "ErrorReport",
]
