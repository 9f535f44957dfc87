"""Tests for failure record helpers."""

from datetime import datetime

from src.core.errors import NonFiniteError
from src.core.models import FailureRecord, FailureStage


def test_failure_record_from_exception_preserves_schema():
    exc = ValueError("bad data")
    record = FailureRecord.from_exception(
        stage=FailureStage.DATA,
        error=exc,
        seed=3,
        method="projbnn",
    )

    assert record.stage == FailureStage.DATA
    assert record.error_type == "ValueError"
    assert record.message == "bad data"
    assert record.seed == 3
    assert record.method == "projbnn"
    assert record.iteration is None
    assert isinstance(record.timestamp, datetime)

    as_dict = record.to_dict()
    assert as_dict["stage"] == "data"
    assert as_dict["error_type"] == "ValueError"
    assert as_dict["message"] == "bad data"
    assert as_dict["seed"] == 3
    assert as_dict["method"] == "projbnn"
    assert "timestamp" in as_dict and as_dict["timestamp"] is not None


def test_failure_record_keeps_training_position():
    exc = NonFiniteError("elbo", stage="vi", iteration=120, sample_index=4)
    record = FailureRecord.from_exception(stage=FailureStage.VI, error=exc, seed=0)

    assert record.error_type == "NonFiniteError"
    assert record.iteration == 120
    assert record.sample_index == 4
    assert "elbo" in record.message


def test_failure_record_from_message_preserves_schema():
    record = FailureRecord.from_message(
        stage=FailureStage.PCAE,
        error_type="MissingDecoder",
        message="no decoder artifact",
        seed=7,
        method="qz_only",
    )

    assert record.stage == FailureStage.PCAE
    assert record.error_type == "MissingDecoder"
    assert record.message == "no decoder artifact"
    assert isinstance(record.timestamp, datetime)

    as_dict = record.to_dict()
    assert as_dict["stage"] == "pcae"
    assert as_dict["error_type"] == "MissingDecoder"
    assert as_dict["method"] == "qz_only"


def test_failure_record_dict_roundtrip():
    record = FailureRecord.from_message(FailureStage.EVAL, "ArtifactError", "gone", seed=1)
    restored = FailureRecord.from_dict(record.to_dict())

    assert restored.stage == FailureStage.EVAL
    assert restored.error_type == "ArtifactError"
    assert restored.message == "gone"
    assert restored.seed == 1
    assert restored.timestamp == record.timestamp


def test_failure_record_from_dict_tolerates_unknown_stage():
    restored = FailureRecord.from_dict({"stage": "nowhere", "timestamp": "not-a-date"})

    assert restored.stage == FailureStage.DATA
    assert restored.error_type == "Unknown"
    assert isinstance(restored.timestamp, datetime)
