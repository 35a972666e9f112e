import pytest
from dualsmooth.models import (
    LogConcaveMLESpec,
    MonitoringSpec,
    NoiseSpec,
    PenaltySpec,
    PiecewiseLinearSpec,
    QuadraticSpec,
)
from pydantic import TypeAdapter, ValidationError

penalty_adapter = TypeAdapter(PenaltySpec)


class TestPenaltySpecUnion:
    def test_discriminates_on_kind(self):
        assert isinstance(penalty_adapter.validate_python({"kind": "quadratic", "M": [[1.0]]}), QuadraticSpec)
        assert isinstance(
            penalty_adapter.validate_python({"kind": "pwl", "knots": [0, 1], "values": [0, 1]}),
            PiecewiseLinearSpec,
        )

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            penalty_adapter.validate_python({"kind": "cauchy"})


class TestQuadraticSpec:
    def test_non_square_rejected(self):
        with pytest.raises(ValidationError):
            QuadraticSpec(M=[[1.0, 0.0]])


class TestMonitoringSpec:
    def test_aliases_and_null_bounds(self):
        spec = MonitoringSpec.model_validate({"kind": "monitoring", "l": [None], "u": [1.0]})
        assert spec.lower == [None]
        assert spec.upper == [1.0]
        assert spec.M_diag is None

    def test_empty_box_rejected(self):
        with pytest.raises(ValidationError):
            MonitoringSpec.model_validate({"l": [1.0], "u": [0.0]})

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            MonitoringSpec.model_validate({"l": [-1.0], "u": [1.0], "M_diag": [-1.0]})


class TestPiecewiseLinearSpec:
    def test_knots_must_increase(self):
        with pytest.raises(ValidationError):
            PiecewiseLinearSpec(knots=[0.0, 0.0, 1.0], values=[0.0, 1.0, 2.0])

    def test_lengths_must_match(self):
        with pytest.raises(ValidationError):
            PiecewiseLinearSpec(knots=[0.0, 1.0], values=[0.0])


class TestLogConcaveMLESpec:
    def test_exactly_one_source(self):
        with pytest.raises(ValidationError):
            LogConcaveMLESpec()
        with pytest.raises(ValidationError):
            LogConcaveMLESpec(samples=[0.0, 1.0, 2.0], samples_path="samples.csv")

    def test_inline_sample_needs_three_points(self):
        with pytest.raises(ValidationError):
            LogConcaveMLESpec(samples=[0.0, 1.0])

    def test_sample_draw(self):
        spec = LogConcaveMLESpec.model_validate(
            {"sample": {"noise": {"kind": "laplace", "scale": 1.0}, "size": 100, "seed": 7}}
        )
        assert spec.sample.size == 100
        assert spec.sample.seed == 7


class TestNoiseSpec:
    def test_gaussian_needs_covariance(self):
        with pytest.raises(ValidationError):
            NoiseSpec(kind="gaussian")

    def test_laplace_needs_scale(self):
        with pytest.raises(ValidationError):
            NoiseSpec(kind="laplace")

    def test_resolved_dimension(self):
        assert NoiseSpec(kind="gaussian", covariance=[[1.0, 0.0], [0.0, 1.0]]).resolved_dimension(5) == 2
        assert NoiseSpec(kind="laplace", scale=1.0).resolved_dimension(3) == 3
        assert NoiseSpec(kind="none", dimension=4).resolved_dimension(3) == 4
