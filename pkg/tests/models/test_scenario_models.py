import math

import pytest
from dualsmooth.models import (
    CheckResult,
    CheckStatus,
    ConvergenceRecord,
    QuadraticSpec,
    Scenario,
    SolverOptions,
    VerificationReport,
)
from pydantic import ValidationError


def _scenario(**overrides) -> dict:
    data = {
        "system": {"horizon": 2, "dynamics": [[1.0]], "measurement": [[1.0]]},
        "process_penalty": {"kind": "quadratic", "M": [[1.0]]},
        "measurement_penalty": {"kind": "laplace", "scale": 1.0},
        "process_noise": {"kind": "gaussian", "covariance": [[1.0]]},
        "measurement_noise": {"kind": "laplace", "scale": 1.0},
    }
    data.update(overrides)
    return data


class TestScenario:
    def test_defaults(self):
        scenario = Scenario.model_validate(_scenario())
        assert scenario.measurements.source == "simulate"
        assert scenario.output_dir == "out"
        assert scenario.seed == 0
        assert scenario.solver == SolverOptions()

    def test_single_penalty_broadcast(self):
        scenario = Scenario.model_validate(_scenario())
        specs = scenario.penalty_specs("process_penalty")
        assert len(specs) == 3
        assert all(spec is specs[0] for spec in specs)
        assert isinstance(specs[0], QuadraticSpec)

    def test_per_step_penalties(self):
        penalties = [{"kind": "quadratic", "M": [[float(t + 1)]]} for t in range(3)]
        scenario = Scenario.model_validate(_scenario(process_penalty=penalties))
        assert [spec.M[0][0] for spec in scenario.penalty_specs("process_penalty")] == [1.0, 2.0, 3.0]

    def test_wrong_penalty_count_rejected(self):
        penalties = [{"kind": "quadratic", "M": [[1.0]]}] * 2
        with pytest.raises(ValidationError):
            Scenario.model_validate(_scenario(process_penalty=penalties))

    def test_simulation_needs_noise_models(self):
        with pytest.raises(ValidationError):
            Scenario.model_validate(_scenario(process_noise=None))

    def test_inline_measurements_row_count(self):
        Scenario.model_validate(_scenario(measurements={"source": "inline", "values": [[0.0], [1.0], [2.0]]}))
        with pytest.raises(ValidationError):
            Scenario.model_validate(_scenario(measurements={"source": "inline", "values": [[0.0]]}))

    def test_file_measurements(self):
        scenario = Scenario.model_validate(_scenario(measurements={"source": "file", "path": "z.csv"}))
        assert scenario.measurements.path == "z.csv"

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            Scenario.model_validate(_scenario(smoother="rts"))


class TestSolverOptions:
    def test_defaults(self):
        opts = SolverOptions()
        assert opts.max_iters == 50000
        assert opts.tol_gap == 1e-8
        assert opts.tol_residual == 1e-9
        assert opts.step_ratio == 1.0
        assert opts.theta == 1.0

    def test_invalid_values_rejected(self):
        with pytest.raises(ValidationError):
            SolverOptions(tol_gap=0.0)
        with pytest.raises(ValidationError):
            SolverOptions(theta=1.5)
        with pytest.raises(ValidationError):
            SolverOptions(max_iters=0)


class TestResults:
    def test_report_passes_with_skips(self):
        report = VerificationReport(
            scenario="s",
            checks=[
                CheckResult(name="a", status=CheckStatus.PASS),
                CheckResult(name="b", status=CheckStatus.SKIP),
            ],
        )
        assert report.passed

    def test_report_fails_on_any_failure(self):
        report = VerificationReport(scenario="s", checks=[CheckResult(name="a", status=CheckStatus.FAIL)])
        assert not report.passed

    def test_infinite_values_serialize(self):
        record = ConvergenceRecord(
            iteration=10, primal_value=math.inf, dual_value=-math.inf, gap=math.inf, best_gap=math.inf, residual=0.1
        )
        dumped = record.model_dump_json()
        assert '"Infinity"' in dumped
        assert '"-Infinity"' in dumped
