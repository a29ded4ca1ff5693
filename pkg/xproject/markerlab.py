"""Marker survival trials.

A marker scheme is a delimiter pair put around labeled chunks before
translation. A trial translates the same sentences under every scheme and
measures how often all delimiters come back intact, and how often the
wrapped content itself got translated. Whether the meaning of the sentence
changed is not measured.
"""

import io
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from rich.console import Console
from rich.table import Table

from xproject.annot import AnnotatedUtterance
from xproject.auto.decorators import instrumented
from xproject.corpus import Dataset
from xproject.errors import AnnotationError, MarkerCollisionError, UsageError
from xproject.projection import IdentifierAllocator
from xproject.translator.base import TranslationBackend, TranslationFailure, TranslationRequest
from xproject.translator.batch import translate_batch

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    WRAP_SURFACE = "WRAP_SURFACE"
    WRAP_IDENTIFIER = "WRAP_IDENTIFIER"

    @classmethod
    def parse(cls, value: str) -> "Mode":
        normalized = value.strip().upper().replace("-", "_")
        aliases = {"SURFACE": cls.WRAP_SURFACE, "IDENTIFIER": cls.WRAP_IDENTIFIER}
        if normalized in aliases:
            return aliases[normalized]
        try:
            return cls(normalized)
        except ValueError:
            raise UsageError(f"unknown marker mode {value!r} (surface or identifier)")


@dataclass(frozen=True)
class MarkerScheme:
    name: str
    open: str
    close: str
    mode: Mode = Mode.WRAP_SURFACE

    def __post_init__(self):
        if not self.name:
            raise UsageError("marker scheme needs a name")
        if not self.open or not self.close:
            raise UsageError(f"marker scheme {self.name!r} needs non-empty delimiters")

    @property
    def pair(self) -> Tuple[str, str]:
        return (self.open, self.close)

    def collides_with(self, text: str) -> bool:
        return self.open in text or self.close in text


BUILTIN_PAIRS: Tuple[Tuple[str, str, str], ...] = (
    ("xml", "<m>", "</m>"),
    ("dollars", "$", "$"),
    ("braces", "{", "}"),
    ("brackets", "[", "]"),
    ("parentheses", "(", ")"),
    ("section", "§", "§"),
    ("currency", "¤", "¤"),
)


def builtin_schemes(mode: Mode = Mode.WRAP_SURFACE) -> List[MarkerScheme]:
    return [MarkerScheme(name, open_, close, mode) for name, open_, close in BUILTIN_PAIRS]


def schemes_from_config(entries: Iterable[Mapping[str, str]], mode: Mode) -> List[MarkerScheme]:
    """Build schemes from ``[[markers.schemes]]`` tables ``{name, open, close[, mode]}``."""
    schemes = []
    for entry in entries:
        unknown = set(entry) - {"name", "open", "close", "mode"}
        if unknown:
            raise UsageError(f"unknown marker scheme keys: {', '.join(sorted(unknown))}")
        try:
            scheme_mode = Mode.parse(entry["mode"]) if "mode" in entry else mode
            schemes.append(MarkerScheme(entry["name"], entry["open"], entry["close"], scheme_mode))
        except KeyError as e:
            raise UsageError(f"marker scheme entry is missing {e.args[0]!r}")
    return schemes


def _check_unique(schemes: Sequence[MarkerScheme]) -> None:
    seen = set()
    for scheme in schemes:
        if scheme.name in seen:
            raise UsageError(f"marker scheme name {scheme.name!r} is used twice")
        seen.add(scheme.name)


# --------------------------------------------------------
# Wrapping
# --------------------------------------------------------
def _unit_contents(utt: AnnotatedUtterance, scheme: MarkerScheme, allocator: IdentifierAllocator) -> List[str]:
    if scheme.mode is Mode.WRAP_IDENTIFIER:
        return [f"0{allocator.next().ordinal}" for _ in utt.spans]
    return [span.surface for span in utt.spans]


def apply_scheme(
    utt: AnnotatedUtterance,
    scheme: MarkerScheme,
    allocator: Optional[IdentifierAllocator] = None,
) -> str:
    """Wrap every span of ``utt`` with the scheme's delimiters.

    WRAP_SURFACE keeps the surface inside the delimiters; WRAP_IDENTIFIER
    puts ``0<ordinal>`` there instead (``$00$`` for the dollar scheme).
    """
    text, _ = _wrap(utt, scheme, allocator or IdentifierAllocator())
    return text


def _wrap(utt: AnnotatedUtterance, scheme: MarkerScheme, allocator: IdentifierAllocator) -> Tuple[str, List[str]]:
    for pos in (utt.plain.find(scheme.open), utt.plain.find(scheme.close)):
        if pos >= 0:
            raise MarkerCollisionError(
                f"scheme {scheme.name!r} delimiters already occur in the text (at character {pos})"
            )
    contents = _unit_contents(utt, scheme, allocator)
    pieces = []
    cursor = 0
    for span, content in zip(utt.spans, contents):
        pieces.append(utt.plain[cursor:span.start])
        pieces.append(f"{scheme.open}{content}{scheme.close}")
        cursor = span.end
    pieces.append(utt.plain[cursor:])
    return "".join(pieces), contents


def extract_units(text: str, scheme: MarkerScheme) -> Optional[List[str]]:
    """Wrapped contents found in ``text``; None when the delimiters do not pair up."""
    if scheme.open == scheme.close:
        if text.count(scheme.open) % 2:
            return None
    elif text.count(scheme.open) != text.count(scheme.close):
        return None
    pattern = re.compile(f"{re.escape(scheme.open)}(.*?){re.escape(scheme.close)}", re.DOTALL)
    units = pattern.findall(text)
    rest = pattern.sub("", text)
    if scheme.open in rest or scheme.close in rest:
        return None
    return units


# --------------------------------------------------------
# Trial
# --------------------------------------------------------
@dataclass
class SchemeResult:
    scheme: MarkerScheme
    n: int = 0
    preserved: int = 0
    content_translated: int = 0
    errors: int = 0

    @property
    def preservation_rate(self) -> float:
        return self.preserved / self.n if self.n else 0.0

    @property
    def content_translated_rate(self) -> float:
        return self.content_translated / self.n if self.n else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "open": self.scheme.open,
            "close": self.scheme.close,
            "mode": self.scheme.mode.value,
            "n": self.n,
            "preservation_rate": self.preservation_rate,
            "content_translated_rate": self.content_translated_rate,
            "errors": self.errors,
        }


@dataclass
class TrialReport:
    per_scheme: Dict[str, SchemeResult] = field(default_factory=dict)
    excluded: int = 0
    backend_id: str = ""

    @property
    def ranking(self) -> List[str]:
        return sorted(self.per_scheme, key=lambda name: (-self.per_scheme[name].preservation_rate, name))

    def to_dict(self) -> Dict[str, object]:
        return {
            "backend_id": self.backend_id,
            "excluded": self.excluded,
            "per_scheme": {name: r.to_dict() for name, r in sorted(self.per_scheme.items())},
            "ranking": self.ranking,
        }

    def table(self) -> Table:
        table = Table(title=f"marker survival ({self.backend_id})")
        table.add_column("scheme")
        table.add_column("markers")
        table.add_column("n", justify="right")
        table.add_column("preserved", justify="right")
        table.add_column("content translated", justify="right")
        table.add_column("errors", justify="right")
        for name in self.ranking:
            r = self.per_scheme[name]
            table.add_row(
                name,
                f"{r.scheme.open} {r.scheme.close}",
                str(r.n),
                f"{r.preservation_rate:.3f}",
                f"{r.content_translated_rate:.3f}",
                str(r.errors),
            )
        return table

    def render_table(self, width: int = 100) -> str:
        buffer = io.StringIO()
        Console(file=buffer, width=width, no_color=True, highlight=False).print(self.table())
        return buffer.getvalue()


def _eligible(dataset: Dataset, schemes: Sequence[MarkerScheme]) -> Tuple[List[AnnotatedUtterance], int]:
    kept: List[AnnotatedUtterance] = []
    excluded = 0
    for example in dataset:
        try:
            utt = example.utterance()
        except AnnotationError:
            excluded += 1
            continue
        if not utt.spans or any(s.collides_with(utt.plain) for s in schemes):
            excluded += 1
            continue
        kept.append(utt)
    return kept, excluded


@instrumented("markerlab.run_trial")
def run_trial(
    sample: Dataset,
    schemes: Sequence[MarkerScheme],
    backend: TranslationBackend,
    src: str,
    tgt: str,
    max_in_flight: int = 1,
) -> TrialReport:
    """Translate every eligible sentence under every scheme and score survival.

    Sentence ``i`` is sent with request sequence ``i`` under each scheme, so
    every scheme sees the same sentences.
    """
    if not schemes:
        raise UsageError("marker trial needs at least one scheme")
    _check_unique(schemes)
    utterances, excluded = _eligible(sample, schemes)
    if not utterances:
        raise UsageError("no sample sentence has spans free of every scheme's delimiters")

    jobs: List[Tuple[MarkerScheme, List[str]]] = []
    requests = []
    for scheme in schemes:
        for seq, utt in enumerate(utterances):
            text, contents = _wrap(utt, scheme, IdentifierAllocator())
            jobs.append((scheme, contents))
            requests.append(TranslationRequest(text, src, tgt, seq=seq))

    outcomes = translate_batch(backend, requests, max_in_flight=max_in_flight)

    report = TrialReport(
        per_scheme={s.name: SchemeResult(s) for s in schemes},
        excluded=excluded,
        backend_id=backend.backend_id,
    )
    for (scheme, contents), outcome in zip(jobs, outcomes):
        result = report.per_scheme[scheme.name]
        result.n += 1
        if isinstance(outcome, TranslationFailure):
            result.errors += 1
            continue
        units = extract_units(outcome.text, scheme)
        if units is None or len(units) != len(contents):
            continue
        changed = Counter(units) != Counter(contents)
        if scheme.mode is Mode.WRAP_IDENTIFIER:
            if not changed:
                result.preserved += 1
            continue
        result.preserved += 1
        if changed:
            result.content_translated += 1

    logger.info(
        "marker trial over %d sentences (%d excluded): %s",
        len(utterances), excluded, ", ".join(
            f"{name}={report.per_scheme[name].preservation_rate:.2f}" for name in report.ranking
        ),
    )
    return report
