"""Inline span annotations.

Canonical markup follows the MASSIVE ``annot_utt`` convention::

    book me a room from [start_date : July 15] to [end_date : July 24]

Offsets are str indices (Unicode code points) into the whitespace-normalized
plain text. Training markup for generated NLU files is ``[surface](label)``.
"""

import re
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

from xproject.errors import AnnotationError

_LABEL_RE = re.compile(r"^[^\s\[\]:]+$")
_TRAINING_LABEL_RE = re.compile(r"^[\w.\-]+$")
_TRAINING_ENTITY_RE = re.compile(r"\[([^\[\]]+)\]\(([^()\s]+)\)")
_WS_SPLIT_RE = re.compile(r"(\s+)")


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to one space and trim both ends."""
    return " ".join(text.split())


@dataclass(frozen=True)
class Span:
    label: str
    surface: str
    start: int
    end: int

    def as_tuple(self) -> Tuple[str, int, int]:
        return (self.label, self.start, self.end)


@dataclass(frozen=True)
class AnnotatedUtterance:
    plain: str
    spans: Tuple[Span, ...] = field(default_factory=tuple)
    intent: str = ""

    def __post_init__(self):
        if not isinstance(self.spans, tuple):
            object.__setattr__(self, "spans", tuple(self.spans))

    @property
    def labels(self) -> List[str]:
        return [s.label for s in self.spans]

    def check(self) -> None:
        """Raise AnnotationError unless every span and text invariant holds."""
        if self.plain != normalize_whitespace(self.plain):
            raise AnnotationError("plain text is not whitespace-normalized")
        for pos, ch in enumerate(self.plain):
            if ch in "[]":
                raise AnnotationError("plain text contains an annotation bracket", pos)
        previous_end = 0
        for span in self.spans:
            if not _LABEL_RE.match(span.label or ""):
                raise AnnotationError(f"invalid label {span.label!r}", span.start)
            if not 0 <= span.start < span.end <= len(self.plain):
                raise AnnotationError(
                    f"span {span.label} offsets ({span.start}, {span.end}) out of range", span.start
                )
            if span.start < previous_end:
                raise AnnotationError(f"span {span.label} overlaps or is out of order", span.start)
            if self.plain[span.start:span.end] != span.surface:
                raise AnnotationError(
                    f"span {span.label} surface {span.surface!r} does not match the text", span.start
                )
            if span.surface != span.surface.strip():
                raise AnnotationError(f"span {span.label} surface has outer whitespace", span.start)
            previous_end = span.end


# --------------------------------------------------------
# Assembly
# --------------------------------------------------------
def assemble(segments: Iterable[Tuple[str, Optional[str]]], intent: str) -> AnnotatedUtterance:
    """Join (text, label-or-None) segments into a normalized utterance.

    Unlabeled text has its whitespace collapsed; labeled text becomes one span
    whose surface is its own normalized form.
    """
    parts: List[str] = []
    spans: List[Span] = []
    length = 0
    pending_space = False

    for text, label in segments:
        if label is None:
            for piece in _WS_SPLIT_RE.split(text):
                if not piece:
                    continue
                if piece.isspace():
                    pending_space = True
                    continue
                if pending_space and length:
                    parts.append(" ")
                    length += 1
                pending_space = False
                parts.append(piece)
                length += len(piece)
            continue

        surface = normalize_whitespace(text)
        if not surface:
            raise AnnotationError(f"empty surface for label {label!r}")
        if pending_space and length:
            parts.append(" ")
            length += 1
        pending_space = False
        start = length
        parts.append(surface)
        length += len(surface)
        spans.append(Span(label, surface, start, length))

    return AnnotatedUtterance("".join(parts), tuple(spans), intent)


# --------------------------------------------------------
# Canonical markup
# --------------------------------------------------------
def parse_annotated(markup: str, intent: str) -> AnnotatedUtterance:
    segments: List[Tuple[str, Optional[str]]] = []
    n = len(markup)
    text_start = 0
    i = 0

    while i < n:
        ch = markup[i]
        if ch == "]":
            raise AnnotationError("closing bracket without an opening bracket", i)
        if ch != "[":
            i += 1
            continue

        j = i + 1
        while j < n and markup[j] not in "[]":
            j += 1
        if j >= n:
            raise AnnotationError("unbalanced bracket: '[' is never closed", i)
        if markup[j] == "[":
            raise AnnotationError("nested annotation", j)

        inner = markup[i + 1:j]
        colon = inner.find(":")
        if colon < 0:
            raise AnnotationError("annotation has no ':' between label and surface", i)
        label = inner[:colon].strip()
        surface = inner[colon + 1:]
        if not label:
            raise AnnotationError("empty label", i)
        if not _LABEL_RE.match(label):
            raise AnnotationError(f"invalid label {label!r}", i + 1)
        if not surface.strip():
            raise AnnotationError(f"empty surface for label {label!r}", i)

        segments.append((markup[text_start:i], None))
        segments.append((surface, label))
        i = j + 1
        text_start = i

    segments.append((markup[text_start:], None))
    return assemble(segments, intent)


def strip_markup(markup: str) -> str:
    return parse_annotated(markup, "").plain


def serialize(utt: AnnotatedUtterance) -> str:
    utt.check()
    out: List[str] = []
    cursor = 0
    for span in utt.spans:
        out.append(utt.plain[cursor:span.start])
        out.append(f"[{span.label} : {span.surface}]")
        cursor = span.end
    out.append(utt.plain[cursor:])
    return "".join(out)


# --------------------------------------------------------
# Training markup
# --------------------------------------------------------
def to_training_markup(utt: AnnotatedUtterance) -> str:
    utt.check()
    out: List[str] = []
    cursor = 0
    for span in utt.spans:
        if not _TRAINING_LABEL_RE.match(span.label):
            raise AnnotationError(
                f"label {span.label!r} cannot be written as a training entity", span.start
            )
        out.append(utt.plain[cursor:span.start])
        out.append(f"[{span.surface}]({span.label})")
        cursor = span.end
    out.append(utt.plain[cursor:])
    return "".join(out)


def parse_training_markup(text: str, intent: str) -> AnnotatedUtterance:
    segments: List[Tuple[str, Optional[str]]] = []
    cursor = 0

    def plain_chunk(start: int, end: int) -> None:
        for k in range(start, end):
            if text[k] in "[]":
                raise AnnotationError("stray bracket in training example", k)
        segments.append((text[start:end], None))

    for match in _TRAINING_ENTITY_RE.finditer(text):
        plain_chunk(cursor, match.start())
        segments.append((match.group(1), match.group(2)))
        cursor = match.end()
    plain_chunk(cursor, len(text))
    return assemble(segments, intent)
