from __future__ import annotations

import random

import pytest

from conftest import make_transcript
from selfplay_lab.analyst.annotate import (
    MULTIPLE_GIVEN_IN_SINGLE_MODE,
    NORMALIZED,
    annotate_batch,
    annotate_transcript,
    build_annotation_request,
    correction_message,
    format_transcript,
    parse_annotation,
)
from selfplay_lab.analyst.taxonomy import approach_taxonomy, technique_names, technique_taxonomy
from selfplay_lab.errors import AnnotationError
from selfplay_lab.gateway.scripted import scripted_backend
from selfplay_lab.types import ANALYST_PARAMS, MULTI, SINGLE
from selfplay_lab.workbench.store import AnnotationStore

VALID = "APPROACH: PCT\nTECHNIQUES: reflective listening"


def _transcripts(n: int = 10):
    return [make_transcript(session_id=f"moderate-sarah-{i:03d}") for i in range(1, n + 1)]


def _code(raw: str, mode: str = MULTI) -> str:
    with pytest.raises(AnnotationError) as info:
        parse_annotation(raw, mode, "s-001")
    return info.value.code


# ------------------------------------------------------------------
# Request building
# ------------------------------------------------------------------

def test_request_is_deterministic():
    transcript = make_transcript()
    assert build_annotation_request(transcript, MULTI) == build_annotation_request(transcript, MULTI)


def test_request_enumerates_every_label():
    request = build_annotation_request(make_transcript(), MULTI)
    system = request.messages[0].content
    for a in approach_taxonomy():
        assert f"- {a.canonical_name}: {a.full_name}." in system
    for t in technique_taxonomy():
        assert f"- {t.canonical_name} [{t.tags_text}]" in system
    assert "APPROACH: <approach label>" in system
    assert "TECHNIQUES: <technique label>[; <technique label>...]" in system


def test_request_shape():
    request = build_annotation_request(make_transcript(session_id="mild-daniel-007"), SINGLE)
    assert [m.role for m in request.messages] == ["system", "user"]
    assert request.messages[1].content == "Therapist: Hello, how may I help you today?\n\nClient: I feel stuck."
    assert request.params == ANALYST_PARAMS
    assert request.metadata == {"agent": "analyst", "session_id": "mild-daniel-007"}
    assert "Assign exactly one technique" in request.messages[0].content
    assert "TECHNIQUES: <technique label>\n" in request.messages[0].content


def test_single_and_multi_requests_differ():
    transcript = make_transcript()
    single = build_annotation_request(transcript, SINGLE).messages[0].content
    multi = build_annotation_request(transcript, MULTI).messages[0].content
    assert single != multi
    assert "in order of first use" in multi


def test_incomplete_transcript_rejected():
    with pytest.raises(AnnotationError) as info:
        build_annotation_request(make_transcript(contents=("hello",), complete=False), MULTI)
    assert info.value.code == "INCOMPLETE_TRANSCRIPT"


def test_invalid_mode_rejected():
    with pytest.raises(AnnotationError) as info:
        build_annotation_request(make_transcript(), "both")
    assert info.value.code == "INVALID_MODE"


def test_custom_analyst_template(tmp_path):
    template = tmp_path / "analyst.j2"
    template.write_text("Classify. Mode={{ mode }}. {{ approaches | length }} approaches.", encoding="utf-8")
    request = build_annotation_request(make_transcript(), SINGLE, template_path=template)
    assert request.messages[0].content == "Classify. Mode=single. 12 approaches.\n"

    with pytest.raises(AnnotationError) as info:
        build_annotation_request(make_transcript(), SINGLE, template_path=tmp_path / "missing.j2")
    assert info.value.code == "INVALID_TEMPLATE"

    undefined = tmp_path / "undefined.j2"
    undefined.write_text("{{ transcript_text }}", encoding="utf-8")
    with pytest.raises(AnnotationError) as info:
        build_annotation_request(make_transcript(), SINGLE, template_path=undefined)
    assert info.value.code == "INVALID_TEMPLATE"


def test_format_transcript_speaker_prefixes():
    text = format_transcript(make_transcript(contents=("a", "b", "c", "d")))
    assert text.splitlines()[::2] == ["Therapist: a", "Client: b", "Therapist: c", "Client: d"]


# ------------------------------------------------------------------
# Parsing
# ------------------------------------------------------------------

def test_parse_full_name_with_abbreviation():
    annotation = parse_annotation(
        "APPROACH: Solution-Focused Brief Therapy (SFBT)\nTECHNIQUES: scaling questions", SINGLE, "s-001",
    )
    assert annotation.approach == "SFBT"
    assert annotation.techniques == ("scaling questions",)
    assert NORMALIZED in annotation.flags


def test_parse_unknown_approach():
    assert _code("APPROACH: Gestalt Therapy\nTECHNIQUES: empty chair") == "UNKNOWN_APPROACH"


def test_parse_rejects_parenthetical_naming_another_label():
    raw = "APPROACH: Gestalt Therapy (CBT)\nTECHNIQUES: empty chair technique (compliments)"
    assert _code(raw) == "UNKNOWN_APPROACH"
    assert _code("APPROACH: CBT\nTECHNIQUES: empty chair technique (compliments)") == "UNKNOWN_TECHNIQUE"


def test_parse_multi_keeps_order():
    annotation = parse_annotation(
        "APPROACH: PCT\nTECHNIQUES: open questions; reflective listening; behavioral activation", MULTI, "s-001",
    )
    assert annotation.approach == "PCT"
    assert annotation.techniques == ("open questions", "reflective listening", "behavioral activation")
    assert annotation.flags == frozenset()


def test_parse_single_mode_keeps_first():
    annotation = parse_annotation("APPROACH: MI\nTECHNIQUES: open questions; affirmations", SINGLE, "s-001")
    assert annotation.techniques == ("open questions",)
    assert MULTIPLE_GIVEN_IN_SINGLE_MODE in annotation.flags


def test_parse_dedups_techniques():
    annotation = parse_annotation("APPROACH: MI\nTECHNIQUES: open questions; Open Questions", MULTI, "s-001")
    assert annotation.techniques == ("open questions",)
    assert MULTIPLE_GIVEN_IN_SINGLE_MODE not in annotation.flags


def test_parse_comma_separated_fallback():
    annotation = parse_annotation("APPROACH: MI\nTECHNIQUES: open questions, affirmations", MULTI, "s-001")
    assert annotation.techniques == ("open questions", "affirmations")
    assert NORMALIZED in annotation.flags


def test_parse_tolerates_markdown_and_chatter():
    raw = "Sure, here is my assessment.\n\n**Approach:** Person-Centered Therapy\n**Techniques:** Reflective Listening"
    annotation = parse_annotation(raw, MULTI, "s-001")
    assert annotation.approach == "PCT"
    assert annotation.techniques == ("reflective listening",)
    assert annotation.raw_response == raw


@pytest.mark.parametrize("raw,code", [
    ("", "EMPTY_RESPONSE"),
    ("   \n ", "EMPTY_RESPONSE"),
    ("I think CBT mostly", "MISSING_FIELD"),
    ("APPROACH: CBT", "MISSING_FIELD"),
    ("TECHNIQUES: mood monitoring", "MISSING_FIELD"),
    ("APPROACH: CBT\nTECHNIQUES: ", "MISSING_FIELD"),
    ("APPROACH: CBT\nTECHNIQUES: thought records", "UNKNOWN_TECHNIQUE"),
    ("APPROACH: CBT\nTECHNIQUES: mood monitoring; journaling", "UNKNOWN_TECHNIQUE"),
])
def test_parse_errors(raw, code):
    assert _code(raw) == code


def test_parse_error_carries_session_id():
    with pytest.raises(AnnotationError) as info:
        parse_annotation("APPROACH: CBT\nTECHNIQUES: journaling", MULTI, "severe-grace-010")
    assert info.value.session_id == "severe-grace-010"


def test_randomized_replies_parse_to_registry_members():
    rng = random.Random(99)
    approaches = [(a.canonical_name, n) for a in approach_taxonomy()
                  for n in (a.canonical_name, a.full_name, a.display_name) + a.aliases]
    techniques = [(t.canonical_name, n) for t in technique_taxonomy() for n in (t.canonical_name,) + t.aliases]
    casings = (str.lower, str.upper, str.title, lambda s: s)

    for _ in range(300):
        approach, approach_text = rng.choice(approaches)
        picked = rng.sample(techniques, rng.randint(1, 4))
        pieces = [rng.choice(casings)(text) for _, text in picked]
        raw = f"APPROACH: {rng.choice(casings)(approach_text)}\nTECHNIQUES: {'; '.join(pieces)}"

        multi = parse_annotation(raw, MULTI, "s-001")
        assert multi.approach == approach
        assert multi.techniques == tuple(dict.fromkeys(c for c, _ in picked))
        assert set(multi.techniques) <= set(technique_names())

        single = parse_annotation(raw, SINGLE, "s-001")
        assert len(single.techniques) == 1
        assert single.techniques[0] == picked[0][0]


def test_correction_message_names_grammar():
    error = AnnotationError("MISSING_FIELD", "no 'APPROACH:' line")
    assert "APPROACH: <approach label>\nTECHNIQUES: <technique label>" in correction_message(error, SINGLE)
    assert "MISSING_FIELD" in correction_message(error, MULTI)


# ------------------------------------------------------------------
# annotate_transcript / annotate_batch
# ------------------------------------------------------------------

def test_annotate_transcript_without_retry():
    annotation, retried = annotate_transcript(make_transcript(), scripted_backend({"analyst": [VALID]}), MULTI)
    assert annotation.approach == "PCT"
    assert not retried


def test_batch_all_valid():
    report = annotate_batch(_transcripts(10), scripted_backend({"analyst": [VALID]}), MULTI)
    assert len(report.annotations) == 10
    assert report.errors == []
    assert [a.session_id for a in report.annotations] == sorted(a.session_id for a in report.annotations)


def test_batch_retries_once_with_correction():
    seen = []

    class Recording:
        def __init__(self, inner):
            self.inner = inner

        def begin_session(self, session_id):
            self.inner.begin_session(session_id)

        def complete(self, request):
            seen.append(request)
            return self.inner.complete(request)

    backend = Recording(scripted_backend({"analyst": ["I think CBT mostly", "APPROACH: CBT\nTECHNIQUES: goal setting"]}))
    report = annotate_batch(_transcripts(1), backend, SINGLE)

    assert len(report.annotations) == 1
    assert report.annotations[0].approach == "CBT"
    assert report.retried == ["moderate-sarah-001"]
    retry = seen[1]
    assert [m.role for m in retry.messages] == ["system", "user", "assistant", "user"]
    assert retry.messages[2].content == "I think CBT mostly"
    assert "MISSING_FIELD" in retry.messages[3].content


def test_batch_unknown_label_twice_is_an_error():
    bad = "APPROACH: Gestalt Therapy\nTECHNIQUES: empty chair"
    report = annotate_batch(_transcripts(2), scripted_backend({"analyst": [bad, bad]}), MULTI)
    assert report.annotations == []
    assert [e.code for e in report.errors] == ["UNKNOWN_APPROACH", "UNKNOWN_APPROACH"]
    assert report.errors[0].session_id == "moderate-sarah-001"


def test_batch_gateway_failure_recorded():
    report = annotate_batch(_transcripts(1), scripted_backend({"therapist": ["unused"]}), MULTI)
    assert [e.code for e in report.errors] == ["SCRIPT_EXHAUSTED"]


def test_batch_incomplete_transcript_recorded():
    transcripts = _transcripts(1) + [make_transcript(session_id="severe-grace-001", contents=("hi",), complete=False)]
    report = annotate_batch(transcripts, scripted_backend({"analyst": [VALID]}), MULTI)
    assert len(report.annotations) == 1
    assert [(e.session_id, e.code) for e in report.errors] == [("severe-grace-001", "INCOMPLETE_TRANSCRIPT")]


def test_batch_resumes_from_store(tmp_path):
    store = AnnotationStore.in_dir(tmp_path)
    backend = scripted_backend({"analyst": [VALID]})
    first = annotate_batch(_transcripts(10), backend, MULTI, store=store)
    assert len(first.annotations) == 10

    second = annotate_batch(_transcripts(10), backend, MULTI, store=store)
    assert (len(second.annotations), second.skipped) == (0, 10)

    single = annotate_batch(_transcripts(10), backend, SINGLE, store=store)
    assert len(single.annotations) == 10
    assert len(store.read_all()) == 20


def test_batch_concurrency_same_store_bytes(tmp_path):
    script = {"analyst": [VALID], "analyst@moderate-sarah-003": ["APPROACH: SFBT\nTECHNIQUES: miracle question"]}
    serial = AnnotationStore.in_dir(tmp_path / "serial")
    parallel = AnnotationStore.in_dir(tmp_path / "parallel")
    annotate_batch(_transcripts(10), scripted_backend(script), MULTI, store=serial, concurrency_limit=1)
    annotate_batch(_transcripts(10), scripted_backend(script), MULTI, store=parallel, concurrency_limit=4)
    assert serial.path.read_bytes() == parallel.path.read_bytes()


def test_report_summary_text():
    report = annotate_batch(_transcripts(2), scripted_backend({"analyst": [VALID]}), SINGLE)
    text = report.format_text()
    assert text.splitlines()[0] == "=== Annotation Summary (single) ==="
    assert f"{'annotated':>28s}: 2" in text
