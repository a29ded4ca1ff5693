"""Mask, translate, validate, backfill.

Each labeled span is replaced by an identifier ``$0N$``, the masked sentence
and every span surface are translated separately, the identifiers are checked
in the output, and the translated surfaces are put back in their place with
their labels. Examples whose identifiers did not survive are quarantined.
"""

import datetime as _dt
import logging
import os
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from xproject.annot import AnnotatedUtterance, assemble, serialize
from xproject.auto.decorators import instrumented
from xproject.core.metrics import run_metrics
from xproject.corpus import Dataset, Example, load_corpus
from xproject.errors import (
    AnnotationError,
    EmptyResultError,
    EmptyTranslationError,
    ProjectionError,
    SpanTranslationError,
    UsageError,
    XProjectError,
)
from xproject.translator.base import (
    TranslationBackend,
    TranslationFailure,
    TranslationRequest,
)
from xproject.translator.batch import translate_outcome
from xproject.translator.cache import CachedBackend, TranslationCache
from xproject.utils.records import write_json, write_records

logger = logging.getLogger(__name__)

IDENTIFIER_RE = re.compile(r"\$0\d+\$")
# short $-delimited tokens; longer runs are treated as prose dollars
SUSPECT_TOKEN_RE = re.compile(r"\$[^$\s]{1,8}\$")

ALLOCATOR_GLOBAL = "global"
ALLOCATOR_PER_EXAMPLE = "per_example"

STANDALONE_SPAN_NOTE = (
    "span surfaces are translated standalone, without their sentence context; "
    "their translation can differ from how the full sentence renders them"
)


# --------------------------------------------------------
# Identifiers
# --------------------------------------------------------
@dataclass(frozen=True, order=True)
class Identifier:
    ordinal: int

    def __post_init__(self):
        if self.ordinal < 0:
            raise ValueError("identifier ordinal must be unsigned")

    @property
    def rendered(self) -> str:
        return f"$0{self.ordinal}$"

    @classmethod
    def parse(cls, token: str) -> "Identifier":
        if not IDENTIFIER_RE.fullmatch(token):
            raise ValueError(f"{token!r} is not an identifier")
        ident = cls(int(token[2:-1]))
        if ident.rendered != token:
            raise ValueError(f"{token!r} is not in canonical form {ident.rendered!r}")
        return ident

    def __str__(self) -> str:
        return self.rendered


class IdentifierAllocator:
    """Thread-safe monotone ordinal counter."""

    def __init__(self, start: int = 0):
        if start < 0:
            raise UsageError("allocator start must be unsigned")
        self._start = start
        self._next = start
        self._lock = threading.Lock()

    def next(self) -> Identifier:
        with self._lock:
            ordinal = self._next
            self._next += 1
        return Identifier(ordinal)

    @property
    def issued(self) -> int:
        return self._next - self._start

    def reset(self) -> None:
        with self._lock:
            self._next = self._start


# --------------------------------------------------------
# Types
# --------------------------------------------------------
@dataclass(frozen=True)
class SpanTableEntry:
    identifier: Identifier
    label: str
    src_surface: str
    tgt_surface: Optional[str] = None


@dataclass(frozen=True)
class MaskedUtterance:
    text: str
    table: Tuple[SpanTableEntry, ...] = ()
    intent: str = ""

    @property
    def expected(self) -> FrozenSet[Identifier]:
        return frozenset(e.identifier for e in self.table)


@dataclass(frozen=True)
class ValidationReport:
    missing: FrozenSet[Identifier] = frozenset()
    duplicated: FrozenSet[Identifier] = frozenset()
    mangled: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not (self.missing or self.duplicated or self.mangled)

    def to_dict(self) -> Dict[str, object]:
        return {
            "missing": sorted(i.rendered for i in self.missing),
            "duplicated": sorted(i.rendered for i in self.duplicated),
            "mangled": list(self.mangled),
            "ok": self.ok,
        }


class QuarantineReason(str, Enum):
    MISSING_ID = "MISSING_ID"
    DUPLICATED_ID = "DUPLICATED_ID"
    MANGLED_ID = "MANGLED_ID"
    TRANSLATION_ERROR = "TRANSLATION_ERROR"
    EMPTY_SPAN_TRANSLATION = "EMPTY_SPAN_TRANSLATION"


@dataclass(frozen=True)
class ProjectionRecord:
    example_id: str
    masked: MaskedUtterance
    translated_masked: Optional[str]
    validation: ValidationReport
    result: Optional[AnnotatedUtterance] = None
    quarantine_reason: Optional[QuarantineReason] = None
    detail: str = ""

    def __post_init__(self):
        if (self.result is None) == (self.quarantine_reason is None):
            raise ValueError("a projection record holds either a result or a quarantine reason")

    def to_quarantine_record(self) -> Dict[str, object]:
        return {
            "example_id": self.example_id,
            "reason": self.quarantine_reason.value if self.quarantine_reason else None,
            "masked_text": self.masked.text,
            "translated_masked": self.translated_masked,
            "validation": self.validation.to_dict(),
            "detail": self.detail,
        }


@dataclass
class ProjectionSummary:
    total: int = 0
    projected: int = 0
    skipped: int = 0
    quarantined_by_reason: Dict[str, int] = field(
        default_factory=lambda: {r.value: 0 for r in QuarantineReason}
    )
    backend_id: str = ""
    started_at: str = ""
    allocator: str = ALLOCATOR_GLOBAL
    note: str = STANDALONE_SPAN_NOTE

    @property
    def quarantined(self) -> int:
        return sum(self.quarantined_by_reason.values())

    @property
    def success_rate(self) -> float:
        return self.projected / self.total if self.total else 1.0

    @property
    def quarantine_rate(self) -> float:
        return self.quarantined / self.total if self.total else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "total": self.total,
            "projected": self.projected,
            "quarantined": self.quarantined,
            "quarantined_by_reason": dict(self.quarantined_by_reason),
            "success_rate": self.success_rate,
            "skipped": self.skipped,
            "backend_id": self.backend_id,
            "started_at": self.started_at,
            "allocator": self.allocator,
            "note": self.note,
        }


# --------------------------------------------------------
# Steps
# --------------------------------------------------------
def mask_spans(utt: AnnotatedUtterance, allocator: IdentifierAllocator) -> MaskedUtterance:
    pieces: List[str] = []
    table: List[SpanTableEntry] = []
    cursor = 0
    for span in utt.spans:
        ident = allocator.next()
        pieces.append(utt.plain[cursor:span.start])
        pieces.append(ident.rendered)
        table.append(SpanTableEntry(ident, span.label, span.surface))
        cursor = span.end
    pieces.append(utt.plain[cursor:])
    return MaskedUtterance("".join(pieces), tuple(table), utt.intent)


def unmask(masked: MaskedUtterance) -> str:
    """Put the source surfaces back (inverse of mask_spans on the plain text)."""
    surfaces = {e.identifier.rendered: e.src_surface for e in masked.table}
    return IDENTIFIER_RE.sub(lambda m: surfaces.get(m.group(0), m.group(0)), masked.text)


def translate_parts(
    masked: MaskedUtterance,
    backend: TranslationBackend,
    src: str,
    tgt: str,
    seq: int = 0,
) -> Tuple[str, Tuple[SpanTableEntry, ...]]:
    """Translate the masked sentence (request ``seq``) and, standalone with
    sequence number 0, every distinct span surface.

    A failed sentence raises its TranslationError; a failed surface raises
    SpanTranslationError carrying the translated sentence. A CachedBackend in
    front of ``backend`` makes repeated surfaces translate once across calls.
    """
    outcome = translate_outcome(backend, TranslationRequest(masked.text, src, tgt, seq))
    if isinstance(outcome, TranslationFailure):
        raise outcome.error
    surfaces: Dict[str, str] = {}
    table = []
    for entry in masked.table:
        if entry.src_surface not in surfaces:
            span = translate_outcome(backend, TranslationRequest(entry.src_surface, src, tgt))
            if isinstance(span, TranslationFailure):
                raise SpanTranslationError(entry.src_surface, span.error, outcome.text)
            surfaces[entry.src_surface] = span.text
        table.append(replace(entry, tgt_surface=surfaces[entry.src_surface]))
    return outcome.text, tuple(table)


def validate_identifiers(translated_masked: str, expected: Iterable[Identifier]) -> ValidationReport:
    expected = frozenset(expected)
    rendered = {i.rendered: i for i in expected}
    counts: Dict[Identifier, int] = {i: 0 for i in expected}
    mangled: List[str] = []
    between: List[str] = []

    cursor = 0
    for match in IDENTIFIER_RE.finditer(translated_masked):
        token = match.group(0)
        if token in rendered:
            counts[rendered[token]] += 1
        else:
            mangled.append(token)
        between.append(translated_masked[cursor:match.start()])
        cursor = match.end()
    between.append(translated_masked[cursor:])

    # identifiers are matched first so a literal "$" next to one is not read as a token
    for chunk in between:
        mangled.extend(m.group(0) for m in SUSPECT_TOKEN_RE.finditer(chunk))

    return ValidationReport(
        missing=frozenset(i for i, n in counts.items() if n == 0),
        duplicated=frozenset(i for i, n in counts.items() if n >= 2),
        mangled=tuple(mangled),
    )


def quarantine_reason(report: ValidationReport) -> Optional[QuarantineReason]:
    if report.mangled and report.missing:
        return QuarantineReason.MANGLED_ID
    if report.missing:
        return QuarantineReason.MISSING_ID
    if report.duplicated:
        return QuarantineReason.DUPLICATED_ID
    if report.mangled:
        return QuarantineReason.MANGLED_ID
    return None


def backfill(
    translated_masked: str,
    table: Sequence[SpanTableEntry],
    intent: str = "",
) -> AnnotatedUtterance:
    """Replace each identifier by its translated surface, labeled.

    Raises ProjectionError if an entry lacks a translation, an identifier is
    unknown or occurs twice, or the result would break annotation invariants.
    """
    by_token = {e.identifier.rendered: e for e in table}
    for entry in table:
        if entry.tgt_surface is None:
            raise ProjectionError(f"{entry.identifier} has no translated surface")
        if not entry.tgt_surface.strip():
            raise ProjectionError(f"{entry.identifier} has an empty translated surface")
        if "[" in entry.tgt_surface or "]" in entry.tgt_surface:
            raise ProjectionError(f"translated surface {entry.tgt_surface!r} contains annotation brackets")
        if IDENTIFIER_RE.search(entry.tgt_surface):
            raise ProjectionError(f"translated surface {entry.tgt_surface!r} contains an identifier")

    segments: List[Tuple[str, Optional[str]]] = []
    used = set()
    cursor = 0
    for match in IDENTIFIER_RE.finditer(translated_masked):
        token = match.group(0)
        entry = by_token.get(token)
        if entry is None:
            raise ProjectionError(f"unexpected identifier {token} in translation")
        if token in used:
            raise ProjectionError(f"identifier {token} occurs more than once")
        used.add(token)
        segments.append((translated_masked[cursor:match.start()], None))
        segments.append((entry.tgt_surface, entry.label))
        cursor = match.end()
    segments.append((translated_masked[cursor:], None))
    if len(used) != len(by_token):
        missing = sorted(set(by_token) - used)
        raise ProjectionError(f"identifiers missing from translation: {', '.join(missing)}")

    plain_text = "".join(text for text, label in segments if label is None)
    if "[" in plain_text or "]" in plain_text:
        raise ProjectionError("translated sentence contains annotation brackets")

    try:
        utt = assemble(segments, intent)
        utt.check()
    except AnnotationError as e:
        raise ProjectionError(f"backfilled utterance is invalid: {e.message}")
    if IDENTIFIER_RE.search(utt.plain):
        raise ProjectionError("backfilled utterance still contains an identifier")
    return utt


def _quarantined(example_id, masked, translated, reason, detail="", report=None) -> ProjectionRecord:
    return ProjectionRecord(
        example_id=example_id,
        masked=masked,
        translated_masked=translated,
        validation=report or ValidationReport(),
        quarantine_reason=reason,
        detail=detail,
    )


def _finish(example_id: str, masked: MaskedUtterance, translated: str) -> ProjectionRecord:
    report = validate_identifiers(translated, masked.expected)
    reason = quarantine_reason(report)
    if reason is not None:
        return _quarantined(example_id, masked, translated, reason, report=report)
    try:
        result = backfill(translated, masked.table, masked.intent)
    except ProjectionError as e:
        return _quarantined(example_id, masked, translated, QuarantineReason.TRANSLATION_ERROR,
                            e.message, report)
    return ProjectionRecord(example_id, masked, translated, report, result=result)


def _project_masked(
    example_id: str,
    masked: MaskedUtterance,
    backend: TranslationBackend,
    src: str,
    tgt: str,
    seq: int,
) -> ProjectionRecord:
    try:
        translated, table = translate_parts(masked, backend, src, tgt, seq)
    except SpanTranslationError as e:
        reason = (QuarantineReason.EMPTY_SPAN_TRANSLATION
                  if isinstance(e.cause, EmptyTranslationError)
                  else QuarantineReason.TRANSLATION_ERROR)
        return _quarantined(example_id, masked, e.translated_masked, reason, e.cause.message)
    except XProjectError as e:
        return _quarantined(example_id, masked, None, QuarantineReason.TRANSLATION_ERROR, e.message)
    return _finish(example_id, replace(masked, table=table), translated)


# --------------------------------------------------------
# Dataset driver
# --------------------------------------------------------
@dataclass
class ProjectionRun:
    projected: Dataset
    quarantine: List[ProjectionRecord]
    summary: ProjectionSummary
    records: List[ProjectionRecord] = field(default_factory=list)

    def __iter__(self):
        return iter((self.projected, self.quarantine, self.summary))


def _previous_output(out_path: Optional[str], locale: str) -> Dict[str, Example]:
    if not out_path or not os.path.exists(out_path):
        return {}
    try:
        previous = load_corpus(out_path, locale)
    except EmptyResultError:
        return {}
    return {e.id: e for e in previous}


def _projected_example(example: Example, utt: AnnotatedUtterance, locale: str) -> Example:
    return Example(
        id=example.id,
        locale=locale,
        domain=example.domain,
        intent=example.intent,
        text=utt.plain,
        annotated_text=serialize(utt),
    )


@instrumented("projection.project_dataset")
def project_dataset(
    dataset: Dataset,
    backend: TranslationBackend,
    src: str,
    tgt: str,
    resume: bool = False,
    out_path: Optional[str] = None,
    tgt_locale: Optional[str] = None,
    cache: Optional[TranslationCache] = None,
    max_in_flight: int = 1,
    allocator: str = ALLOCATOR_GLOBAL,
    allocator_start: int = 0,
) -> ProjectionRun:
    """Project every example of ``dataset`` into ``tgt``.

    Output order follows input order. With ``resume`` the records already in
    ``out_path`` (by id) are kept and not translated again. Example ``i`` goes
    through translate_parts with request sequence number ``i``; at most
    ``max_in_flight`` examples are translated at once.
    """
    if allocator not in (ALLOCATOR_GLOBAL, ALLOCATOR_PER_EXAMPLE):
        raise UsageError(f"unknown allocator mode {allocator!r}")
    if resume and not out_path:
        raise UsageError("resume needs the output path of the previous run")
    if not isinstance(max_in_flight, int) or max_in_flight < 1:
        raise UsageError(f"max_in_flight must be a positive integer, got {max_in_flight!r}")
    locale = tgt_locale or tgt
    summary = ProjectionSummary(
        backend_id=backend.backend_id,
        started_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        allocator=allocator,
    )
    previous = _previous_output(out_path, locale) if resume else {}

    # masking runs sequentially in input order, before any translation
    ids = IdentifierAllocator(allocator_start)
    masked: Dict[int, MaskedUtterance] = {}
    early: Dict[int, ProjectionRecord] = {}
    for i, example in enumerate(dataset.examples):
        if example.id in previous:
            summary.skipped += 1
            continue
        if allocator == ALLOCATOR_PER_EXAMPLE:
            ids.reset()
        try:
            masked[i] = mask_spans(example.utterance(), ids)
        except AnnotationError as e:
            early[i] = _quarantined(example.id, MaskedUtterance(example.text, (), example.intent),
                                    None, QuarantineReason.TRANSLATION_ERROR, e.message)

    # surfaces shared between examples are translated once per run
    cached = backend if isinstance(backend, CachedBackend) else CachedBackend(
        backend, cache if cache is not None else TranslationCache()
    )

    def project(item: Tuple[int, MaskedUtterance]) -> Tuple[int, ProjectionRecord]:
        i, m = item
        return i, _project_masked(dataset.examples[i].id, m, cached, src, tgt, i)

    records: Dict[int, ProjectionRecord] = dict(early)
    if max_in_flight == 1 or len(masked) <= 1:
        records.update(map(project, masked.items()))
    else:
        with ThreadPoolExecutor(max_workers=min(max_in_flight, len(masked)),
                                thread_name_prefix="xproject-projection") as pool:
            records.update(pool.map(project, masked.items()))

    projected: List[Example] = []
    quarantine: List[ProjectionRecord] = []
    ordered: List[ProjectionRecord] = []
    meters = run_metrics()
    for i, example in enumerate(dataset.examples):
        if example.id in previous:
            projected.append(previous[example.id])
            continue
        record = records[i]
        ordered.append(record)
        summary.total += 1
        if record.result is not None:
            summary.projected += 1
            projected.append(_projected_example(example, record.result, locale))
            meters.increment_counter("xproject.projection.projected", 1, {"backend": backend.backend_id})
        else:
            quarantine.append(record)
            summary.quarantined_by_reason[record.quarantine_reason.value] += 1
            meters.increment_counter(
                "xproject.projection.quarantined", 1, {"reason": record.quarantine_reason.value}
            )

    logger.info(
        "projected %d/%d examples (%d quarantined, %d resumed) with %s",
        summary.projected, summary.total, summary.quarantined, summary.skipped, backend.backend_id,
    )
    provenance = f"projected from {dataset.locale} by {backend.backend_id} at {summary.started_at}"
    return ProjectionRun(Dataset(locale, tuple(projected), provenance), quarantine, summary, ordered)


def write_quarantine(records: Iterable[ProjectionRecord], path: str) -> int:
    return write_records(path, (r.to_quarantine_record() for r in records))


def write_report(summary: ProjectionSummary, path: str) -> None:
    write_json(path, summary.to_dict())
