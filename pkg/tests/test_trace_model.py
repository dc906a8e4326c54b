from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agenttrace.errors import FieldTypeError, MalformedDocument
from agenttrace.trace_model import (
    SpanRecord,
    parse_trace_file,
    serialize_trace,
    span_to_dict,
    validate_span,
)

from .conftest import fuzz_span_dict, listing_skeleton, make_span, valid_span_dict


def _parse_one(obj) -> SpanRecord:
    spans = parse_trace_file(json.dumps([obj]).encode())
    assert len(spans) == 1
    return spans[0]


class TestParse:
    def test_empty_array(self) -> None:
        assert parse_trace_file(b"[]") == []

    def test_listing_skeleton_parses_with_optionals_absent_or_zero(self) -> None:
        span = _parse_one(listing_skeleton())
        assert span.trace_id == "0" * 32
        assert span.parent_span_id is None
        assert span.start_time == 0 and span.end_time == 0 and span.duration_ns == 0
        assert span.attributes.operation_name is None
        assert span.attributes.usage_input_tokens == 0
        assert span.attributes.usage_total_tokens == 0
        assert span.attributes.finish_reasons == ()
        assert span.attributes.run_outcome is None
        assert span.communication.is_in_process_call is False
        assert span.resource["deployment.environment"] == "local"
        assert validate_span(span) == []

    def test_duration_mismatch_parses_then_validates(self) -> None:
        span = _parse_one(valid_span_dict(duration_ns=999))
        violations = validate_span(span)
        assert [(v.field, v.rule) for v in violations] == [("duration_ns", "duration")]

    def test_not_an_array_is_malformed(self) -> None:
        with pytest.raises(MalformedDocument):
            parse_trace_file(b'{"trace_id": "x"}')

    def test_syntax_error_is_malformed(self) -> None:
        with pytest.raises(MalformedDocument):
            parse_trace_file(b"[{,]")

    def test_non_integer_start_time_names_index_and_key(self) -> None:
        with pytest.raises(FieldTypeError) as exc_info:
            parse_trace_file(json.dumps([valid_span_dict(), valid_span_dict(start_time="soon")]).encode())
        assert exc_info.value.index == 1
        assert exc_info.value.key == "start_time"

    def test_float_time_rejected(self) -> None:
        with pytest.raises(FieldTypeError):
            _parse_one(valid_span_dict(start_time=1.5))

    def test_missing_required_field(self) -> None:
        obj = valid_span_dict()
        del obj["trace_id"]
        with pytest.raises(FieldTypeError) as exc_info:
            _parse_one(obj)
        assert exc_info.value.key == "trace_id"

    def test_unknown_attribute_keys_preserved(self) -> None:
        obj = valid_span_dict(attributes={"candidates_token_count": 12, "x.y": ["deep", 1]})
        span = _parse_one(obj)
        assert span.attributes.extra == {"candidates_token_count": 12, "x.y": ["deep", 1]}

    def test_agent_name_falls_back_to_attribute(self) -> None:
        obj = valid_span_dict(attributes={"gen_ai.agent.name": "grader"})
        del obj["agent_name"]
        assert _parse_one(obj).agent_name == "grader"


class TestSerialize:
    def test_empty_round_trip(self) -> None:
        data = serialize_trace([])
        assert json.loads(data) == []
        assert parse_trace_file(data) == []

    def test_round_trip_identity_with_extras(self) -> None:
        obj = valid_span_dict(
            attributes={
                "gen_ai.usage.input_tokens": 10,
                "gen_ai.usage.output_tokens": 5,
                "gen_ai.usage.total_tokens": 15,
                "vendor.opaque": {"a": [1, 2]},
            }
        )
        original = _parse_one(obj)
        again = parse_trace_file(serialize_trace([original]))
        assert again == [original]

    def test_serialized_document_contains_every_listing_key(self) -> None:
        span = _parse_one(listing_skeleton())
        doc = json.loads(serialize_trace([span]))[0]
        skeleton = listing_skeleton()
        assert set(doc) == set(skeleton)
        assert set(doc["attributes"]) >= set(skeleton["attributes"])
        assert set(doc["status"]) == {"status_code", "description"}
        assert set(doc["communication"]) == set(skeleton["communication"])
        assert set(doc["resource"]["attributes"]) == set(skeleton["resource"]["attributes"])

    def test_fuzz_round_trip(self) -> None:
        rng = random.Random(20240817)
        spans = [_parse_one(fuzz_span_dict(rng)) for _ in range(200)]
        assert parse_trace_file(serialize_trace(spans)) == spans

    @given(st.lists(st.integers(0, 2**63), min_size=0, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_property(self, seeds: list[int]) -> None:
        spans = [_parse_one(fuzz_span_dict(random.Random(s))) for s in seeds]
        assert parse_trace_file(serialize_trace(spans)) == spans


class TestValidate:
    def test_valid_span_no_violations(self) -> None:
        assert validate_span(make_span()) == []

    def test_short_trace_id_single_length_violation(self) -> None:
        span = make_span(trace_id="a" * 31)
        violations = validate_span(span)
        assert [(v.field, v.rule) for v in violations] == [("trace_id", "length")]

    def test_usage_sum_violation(self) -> None:
        span = make_span(
            attributes={
                "gen_ai.usage.input_tokens": 10,
                "gen_ai.usage.output_tokens": 5,
                "gen_ai.usage.total_tokens": 16,
            }
        )
        violations = validate_span(span)
        assert [(v.field, v.rule) for v in violations] == [("usage_total_tokens", "sum")]

    # Single-field mutations and the exact number of invariants each breaks.
    MUTATIONS = [
        ("trace_id", "A" * 32, 1),            # charset
        ("trace_id", "ab" * 15, 1),           # length
        ("span_id", "zz" * 8, 1),             # charset
        ("parent_span_id", "cd" * 8, 1),      # self parent
        ("parent_span_id", "e" * 15, 1),      # length
        ("duration_ns", 1, 1),                # duration mismatch
        ("kind", "SIDEWAYS", 1),              # enum
        ("end_time", 0, 2),                   # order + duration both break
    ]

    @pytest.mark.parametrize("field_name,value,expected", MUTATIONS)
    def test_mutation_yields_expected_violations(self, field_name, value, expected) -> None:
        span = make_span(**{field_name: value})
        assert len(validate_span(span)) == expected

    ATTR_MUTATIONS = [
        ({"gen_ai.operation.name": "telepathy"}, 1),
        ({"gen_ai.usage.input_tokens": -1}, 1),
        ({"agent.retry.trigger": "boredom"}, 1),
        ({"agent.retry.previous_span_id": "nope"}, 1),
        ({"run.outcome": "maybe"}, 1),
        ({"run.judgement": "sideways"}, 1),
        ({"agent.failure.category": "cosmic"}, 1),
        ({"gen_ai.agent.name": "someone_else"}, 1),
    ]

    @pytest.mark.parametrize("attrs,expected", ATTR_MUTATIONS)
    def test_attribute_mutation_yields_expected_violations(self, attrs, expected) -> None:
        span = make_span(attributes=attrs)
        assert len(validate_span(span)) == expected

    def test_bad_status_code(self) -> None:
        span = make_span(status={"status_code": "BROKEN"})
        assert [(v.field, v.rule) for v in validate_span(span)] == [("status.status_code", "enum")]

    def test_communication_sum(self) -> None:
        span = make_span(
            communication={
                "is_in_process_call": True,
                "input_message_size_bytes": 10,
                "output_message_size_bytes": 5,
                "total_message_size_bytes": 99,
            }
        )
        assert [(v.field, v.rule) for v in validate_span(span)] == [
            ("communication.total_message_size_bytes", "sum")
        ]

    def test_fuzz_spans_are_valid(self) -> None:
        rng = random.Random(5)
        for _ in range(300):
            span = _parse_one(fuzz_span_dict(rng))
            assert validate_span(span) == []

    def test_span_to_dict_matches_serialize(self) -> None:
        span = make_span()
        assert json.loads(serialize_trace([span]))[0] == span_to_dict(span)
