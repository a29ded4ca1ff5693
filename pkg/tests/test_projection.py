import json
import random

import pytest

from conftest import BOOK_ROOM, CountingBackend, massive_record, random_records
from xproject.annot import parse_annotated, serialize
from xproject.corpus import Dataset, load_corpus, write_corpus
from xproject.errors import ProjectionError, UsageError
from xproject.projection import (
    ALLOCATOR_PER_EXAMPLE,
    Identifier,
    IdentifierAllocator,
    QuarantineReason,
    SpanTableEntry,
    backfill,
    mask_spans,
    project_dataset,
    quarantine_reason,
    translate_parts,
    unmask,
    validate_identifiers,
    write_quarantine,
    write_report,
)
from xproject.translator import (
    FaultBackend,
    FaultProfile,
    IdentityBackend,
    PseudoBackend,
    ReverseBackend,
    TranslationRequest,
)


def ident(n):
    return Identifier(n)


# --------------------------------------------------------
# Identifiers and masking
# --------------------------------------------------------
def test_identifier_rendering():
    assert ident(5).rendered == "$05$"
    assert ident(7).rendered == "$07$"
    assert ident(123).rendered == "$0123$"
    assert Identifier.parse("$0123$") == ident(123)
    with pytest.raises(ValueError):
        Identifier.parse("$1$")


@pytest.mark.parametrize("token", ["$000$", "$007$", "$00123$"])
def test_identifier_parse_rejects_padded_ordinals(token):
    with pytest.raises(ValueError):
        Identifier.parse(token)


def test_allocator_counts_from_start():
    allocator = IdentifierAllocator(41)
    assert allocator.next() == ident(41)
    assert allocator.next() == ident(42)
    assert allocator.issued == 2
    allocator.reset()
    assert allocator.next() == ident(41)


def test_mask_book_room():
    masked = mask_spans(parse_annotated(BOOK_ROOM, "book_room"), IdentifierAllocator())

    assert masked.text == "book me a room from $00$ to $01$"
    assert [(e.identifier.rendered, e.label, e.src_surface) for e in masked.table] == [
        ("$00$", "start_date", "July 15"),
        ("$01$", "end_date", "July 24"),
    ]
    assert unmask(masked) == "book me a room from July 15 to July 24"


def test_mask_zero_spans_and_custom_start():
    plain = mask_spans(parse_annotated("hello world", "x"), IdentifierAllocator())
    assert plain.text == "hello world" and plain.table == ()

    one = mask_spans(parse_annotated("at [time : noon]", "x"), IdentifierAllocator(41))
    assert one.text == "at $041$"


# --------------------------------------------------------
# Translation, validation, backfill
# --------------------------------------------------------
def test_translate_parts_identity_and_reverse():
    masked = mask_spans(parse_annotated("see [time : July 15] now", "x"), IdentifierAllocator())

    translated, table = translate_parts(masked, IdentityBackend(), "fr", "wo")
    assert translated == masked.text
    assert all(e.tgt_surface == e.src_surface for e in table)

    translated, table = translate_parts(masked, ReverseBackend(), "fr", "wo")
    assert translated == "now $00$ see"
    assert table[0].tgt_surface == "15 July"


def test_translate_parts_reuses_repeated_surfaces():
    backend = CountingBackend()
    masked = mask_spans(parse_annotated("[date : today] or [date : today]", "x"), IdentifierAllocator())
    translate_parts(masked, backend, "fr", "wo")
    assert backend.calls == ["$00$ or $01$", "today"]


def test_validate_identifiers():
    expected = {ident(0), ident(1)}
    assert validate_identifiers("a $00$ b $01$", expected).ok

    report = validate_identifiers("a $00$ b", expected)
    assert report.missing == {ident(1)}

    report = validate_identifiers("x $0A$ $00$ y $00$", {ident(0)})
    assert report.mangled == ("$0A$",)
    assert report.duplicated == {ident(0)}
    assert not report.missing


def test_long_dollar_runs_are_not_suspect():
    report = validate_identifiers("it costs $100 000 and $00$", {ident(0)})
    assert report.ok


def test_literal_dollar_beside_an_identifier_is_prose():
    assert validate_identifiers("pay $5$00$ now", {ident(0)}).ok
    report = validate_identifiers("pay $5$oo$ now", {ident(0)})
    assert report.missing == {ident(0)}
    assert quarantine_reason(report) == QuarantineReason.MANGLED_ID


def test_quarantine_reason_precedence():
    r = validate_identifiers
    assert quarantine_reason(r("$00$", {ident(0)})) is None
    assert quarantine_reason(r("nothing", {ident(0)})) == QuarantineReason.MISSING_ID
    assert quarantine_reason(r("$00$ $00$", {ident(0)})) == QuarantineReason.DUPLICATED_ID
    assert quarantine_reason(r("$00$ $0x$", {ident(0)})) == QuarantineReason.MANGLED_ID
    assert quarantine_reason(r("$ot$", {ident(7)})) == QuarantineReason.MANGLED_ID


def test_backfill_restores_labels_in_target_order():
    table = [SpanTableEntry(ident(0), "time", "July 15", "July 15")]
    utt = backfill("now $00$ see", table, "x")

    assert utt.plain == "now July 15 see"
    assert [s.as_tuple() for s in utt.spans] == [("time", 4, 11)]
    assert backfill("hello", []).plain == "hello"


def test_backfill_accepts_reordered_identifiers():
    table = [
        SpanTableEntry(ident(0), "start_date", "July 15", "15 juillet"),
        SpanTableEntry(ident(1), "end_date", "July 24", "24 juillet"),
    ]
    utt = backfill("du $01$ au $00$", table)
    assert serialize(utt) == "du [end_date : 24 juillet] au [start_date : 15 juillet]"


@pytest.mark.parametrize(
    "text, surface",
    [
        ("now $00$ see", None),
        ("now $00$ see", "   "),
        ("now $00$ see", "a [b]"),
        ("now $00$ $00$", "x"),
        ("now $01$", "x"),
        ("now [oops] $00$", "x"),
    ],
)
def test_backfill_rejects_broken_inputs(text, surface):
    with pytest.raises(ProjectionError):
        backfill(text, [SpanTableEntry(ident(0), "time", "src", surface)])


# --------------------------------------------------------
# Dataset driver
# --------------------------------------------------------
def test_identity_projection_is_invariant(write_massive):
    records = random_records(random.Random(99), 1000)
    dataset = load_corpus(write_massive(records), "fr-FR")

    projected, quarantine, summary = project_dataset(dataset, IdentityBackend(), "fr", "wo", tgt_locale="wo-SN")

    assert quarantine == []
    assert summary.success_rate == 1.0
    assert summary.total == summary.projected == 1000
    assert projected.locale == "wo-SN"
    for source, target in zip(dataset.examples, projected.examples):
        assert (target.id, target.intent, target.domain) == (source.id, source.intent, source.domain)
        assert target.annotated_text == source.annotated_text
        assert target.text == source.text


def test_pseudo_projection_keeps_labels(write_massive):
    dataset = load_corpus(write_massive(random_records(random.Random(4), 50)), "fr-FR")
    projected, quarantine, _ = project_dataset(dataset, PseudoBackend(), "fr", "wo")

    assert quarantine == []
    for source, target in zip(dataset.examples, projected.examples):
        src_labels = sorted(s.label for s in source.utterance().spans)
        tgt_labels = sorted(s.label for s in target.utterance().spans)
        assert src_labels == tgt_labels
        assert target.intent == source.intent


def test_dropping_every_identifier_quarantines_spanful_examples(write_massive):
    dataset = load_corpus(write_massive(random_records(random.Random(8), 10, min_spans=1)), "fr-FR")
    backend = FaultBackend(IdentityBackend(), FaultProfile(drop_identifier_prob=1.0))

    projected, quarantine, summary = project_dataset(dataset, backend, "fr", "wo")

    assert len(projected) == 0
    assert len(quarantine) == 10
    assert summary.quarantined_by_reason["MISSING_ID"] == 10
    assert summary.success_rate == 0.0


def expected_reason(events):
    kinds = {e.kind for e in events}
    if kinds & {"mutate", "translate"}:
        return QuarantineReason.MANGLED_ID
    if "drop" in kinds:
        return QuarantineReason.MISSING_ID
    if "duplicate" in kinds:
        return QuarantineReason.DUPLICATED_ID
    return None


@pytest.mark.parametrize("seed", range(20))
def test_quarantine_matches_replayed_fault_stream(write_massive, seed):
    records = random_records(random.Random(1000 + seed), 200)
    dataset = load_corpus(write_massive(records), "fr-FR")
    profile = FaultProfile(
        drop_identifier_prob=0.1,
        mutate_digit_to_letter_prob=0.05,
        translate_marker_content_prob=0.05,
        duplicate_identifier_prob=0.1,
        seed=seed,
    )
    backend = FaultBackend(IdentityBackend(), profile)

    run = project_dataset(dataset, backend, "fr", "wo")

    assert len(run.records) == 200
    mismatches = []
    for i, record in enumerate(run.records):
        events = backend.plan(TranslationRequest(record.masked.text, "fr", "wo", seq=i))
        assert {e.kind for e in events} <= {"drop", "mutate", "translate", "duplicate"}
        if record.quarantine_reason != expected_reason(events):
            mismatches.append((record.example_id, record.quarantine_reason, events))
    assert mismatches == []
    assert {r.example_id for r in run.quarantine} == {
        r.example_id for r in run.records if r.quarantine_reason is not None
    }


def test_drop_half_quarantines_exactly_the_dropped(write_massive):
    dataset = load_corpus(write_massive(random_records(random.Random(21), 100, min_spans=1)), "fr-FR")
    backend = FaultBackend(IdentityBackend(), FaultProfile(drop_identifier_prob=0.5, seed=5))

    run = project_dataset(dataset, backend, "fr", "wo")

    dropped = {
        r.example_id
        for i, r in enumerate(run.records)
        if backend.plan(TranslationRequest(r.masked.text, "fr", "wo", seq=i))
    }
    assert {r.example_id for r in run.quarantine} == dropped
    assert 0 < len(dropped) < 100


def test_parallel_projection_matches_sequential(write_massive):
    dataset = load_corpus(write_massive(random_records(random.Random(12), 60)), "fr-FR")
    backend = FaultBackend(IdentityBackend(), FaultProfile(drop_identifier_prob=0.3, seed=2))

    one = project_dataset(dataset, backend, "fr", "wo")
    many = project_dataset(dataset, backend, "fr", "wo", max_in_flight=8)

    assert one.projected.examples == many.projected.examples
    assert [r.example_id for r in one.quarantine] == [r.example_id for r in many.quarantine]


def test_per_example_allocator_restarts_ordinals(small_corpus):
    dataset = load_corpus(small_corpus, "fr-FR")
    run = project_dataset(dataset, IdentityBackend(), "fr", "wo", allocator=ALLOCATOR_PER_EXAMPLE)

    assert all(
        [e.identifier.ordinal for e in r.masked.table] == list(range(len(r.masked.table)))
        for r in run.records
    )
    assert run.summary.allocator == ALLOCATOR_PER_EXAMPLE
    with pytest.raises(UsageError):
        project_dataset(dataset, IdentityBackend(), "fr", "wo", allocator="random")


def test_failed_span_translation_is_quarantined(write_massive):
    path = write_massive([
        massive_record("1", "go at [time : noon]"),
        massive_record("2", "stay [place_name : home] please"),
    ])
    dataset = load_corpus(path, "fr-FR")

    projected, quarantine, summary = project_dataset(dataset, CountingBackend(fail_on={"noon"}), "fr", "wo")

    assert projected.ids == ["2"]
    assert [r.example_id for r in quarantine] == ["1"]
    assert summary.quarantined_by_reason["TRANSLATION_ERROR"] == 1


def test_empty_span_translation_reason(write_massive):
    class BlankSurfaces(IdentityBackend):
        def translate_text(self, request):
            return request.text if "$" in request.text else " "

    dataset = load_corpus(write_massive([massive_record("1", "go at [time : noon]")]), "fr-FR")
    _, quarantine, _ = project_dataset(dataset, BlankSurfaces(), "fr", "wo")
    assert quarantine[0].quarantine_reason == QuarantineReason.EMPTY_SPAN_TRANSLATION


def test_resume_skips_existing_output(tmp_path, small_corpus):
    dataset = load_corpus(small_corpus, "fr-FR")
    out = str(tmp_path / "out.jsonl")
    first, _, _ = project_dataset(dataset, IdentityBackend(), "fr", "wo")
    write_corpus(Dataset(first.locale, first.examples[:3], first.provenance), out)

    backend = CountingBackend()
    projected, _, summary = project_dataset(dataset, backend, "fr", "wo", resume=True, out_path=out)

    assert projected.ids == dataset.ids
    assert summary.skipped == 3 and summary.total == 2
    assert not any("book me a room" in c for c in backend.calls)


def test_report_and_quarantine_files(tmp_path, write_massive):
    dataset = load_corpus(write_massive(random_records(random.Random(8), 5, min_spans=1)), "fr-FR")
    backend = FaultBackend(IdentityBackend(), FaultProfile(drop_identifier_prob=1.0))
    _, quarantine, summary = project_dataset(dataset, backend, "fr", "wo")

    write_quarantine(quarantine, str(tmp_path / "q.jsonl"))
    write_report(summary, str(tmp_path / "r.json"))

    lines = (tmp_path / "q.jsonl").read_text(encoding="utf-8").splitlines()
    first = json.loads(lines[0])
    assert len(lines) == 5
    assert first["reason"] == "MISSING_ID"
    assert set(first) >= {"example_id", "reason", "masked_text", "translated_masked", "validation"}
    report = json.loads((tmp_path / "r.json").read_text(encoding="utf-8"))
    assert report["quarantined"] == 5
    assert report["success_rate"] == 0.0
    assert "standalone" in report["note"]


def test_dollar_before_a_span_projects_under_identity(write_massive):
    dataset = load_corpus(write_massive([massive_record("1", "it costs $[amount : 5] today")]), "fr-FR")

    run = project_dataset(dataset, IdentityBackend(), "fr", "wo")

    assert run.quarantine == []
    assert run.records[0].masked.text == "it costs $$00$ today"
    assert run.projected.examples[0].annotated_text == "it costs $[amount : 5] today"


def test_surfaces_shared_between_examples_translate_once(write_massive):
    dataset = load_corpus(write_massive([
        massive_record("1", "see you [date : today]"),
        massive_record("2", "not [date : today] please"),
    ]), "fr-FR")
    backend = CountingBackend()

    projected, quarantine, _ = project_dataset(dataset, backend, "fr", "wo")

    assert projected.ids == ["1", "2"] and quarantine == []
    assert backend.calls.count("today") == 1


def test_resume_retries_previous_quarantine(tmp_path, write_massive):
    dataset = load_corpus(write_massive([
        massive_record("1", "go at [time : noon]"),
        massive_record("2", "stay [place_name : home] please"),
        massive_record("3", "hello there"),
    ]), "fr-FR")
    out = str(tmp_path / "out.jsonl")
    first = project_dataset(dataset, CountingBackend(fail_on={"noon"}), "fr", "wo")
    write_corpus(first.projected, out)

    backend = CountingBackend(fail_on={"noon"})
    again = project_dataset(dataset, backend, "fr", "wo", resume=True, out_path=out)

    assert again.summary.skipped == 2
    assert [r.example_id for r in again.quarantine] == ["1"]
    assert backend.calls == ["go at $00$", "noon"]
