"""MASSIVE-style corpora: loading, filtering, splitting, statistics."""

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from xproject.annot import AnnotatedUtterance, normalize_whitespace, parse_annotated
from xproject.auto.decorators import instrumented
from xproject.errors import AnnotationError, CorpusError, EmptyResultError, UsageError
from xproject.utils.prng import SplitMix64
from xproject.utils.records import iter_lines, write_records

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("id", "locale", "scenario", "intent", "utt", "annot_utt")

# ten domains / 27 intents extracted from the French side of MASSIVE
MASSIVE_FR_EXTRACT: Dict[str, Tuple[str, int]] = {
    "transport_query": ("transport", 314),
    "transport_ticket": ("transport", 187),
    "transport_taxi": ("transport", 150),
    "transport_traffic": ("transport", 154),
    "calendar_query": ("calendar", 794),
    "calendar_set": ("calendar", 1150),
    "calendar_remove": ("calendar", 426),
    "alarm_set": ("alarm", 254),
    "alarm_remove": ("alarm", 113),
    "alarm_query": ("alarm", 183),
    "lists_query": ("lists", 299),
    "lists_remove": ("lists", 253),
    "lists_createoradd": ("lists", 241),
    "takeaway_query": ("takeaway", 181),
    "takeaway_order": ("takeaway", 177),
    "play_audiobook": ("play", 226),
    "play_game": ("play", 169),
    "play_music": ("play", 938),
    "play_podcasts": ("play", 290),
    "play_radio": ("play", 401),
    "news_query": ("news", 709),
    "recommendation_locations": ("recommendation", 235),
    "recommendation_events": ("recommendation", 259),
    "recommendation_movies": ("recommendation", 102),
    "datetime_query": ("datetime", 502),
    "datetime_convert": ("datetime", 76),
    "weather_query": ("weather", 855),
}

NAMED_INTENT_FILTERS: Dict[str, FrozenSet[str]] = {
    "massive-extract": frozenset(MASSIVE_FR_EXTRACT),
}


# --------------------------------------------------------
# Types
# --------------------------------------------------------
@dataclass(frozen=True)
class Example:
    id: str
    locale: str
    domain: str
    intent: str
    text: str
    annotated_text: str

    def utterance(self) -> AnnotatedUtterance:
        return parse_annotated(self.annotated_text, self.intent)

    def to_record(self) -> Dict[str, str]:
        return {
            "id": self.id,
            "locale": self.locale,
            "scenario": self.domain,
            "intent": self.intent,
            "utt": self.text,
            "annot_utt": self.annotated_text,
        }


@dataclass(frozen=True)
class LoadDiagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class Dataset:
    locale: str
    examples: Tuple[Example, ...] = ()
    provenance: str = ""
    diagnostics: Tuple[LoadDiagnostic, ...] = ()

    def __post_init__(self):
        if not isinstance(self.examples, tuple):
            object.__setattr__(self, "examples", tuple(self.examples))
        if not isinstance(self.diagnostics, tuple):
            object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def ids(self) -> List[str]:
        return [e.id for e in self.examples]


@dataclass(frozen=True)
class DatasetStats:
    per_domain: Dict[str, int] = field(default_factory=dict)
    per_intent: Dict[str, int] = field(default_factory=dict)
    total: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "total": self.total,
            "per_domain": dict(sorted(self.per_domain.items())),
            "per_intent": dict(sorted(self.per_intent.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float = 0.8
    seed: int = 0
    stratified: bool = False


# --------------------------------------------------------
# Loading
# --------------------------------------------------------
def _example_from_record(record: Dict[str, object]) -> Example:
    missing = [k for k in REQUIRED_KEYS if k not in record]
    if missing:
        raise CorpusError(f"record lacks keys: {', '.join(missing)}")
    values = {k: record[k] for k in REQUIRED_KEYS}
    for key, value in values.items():
        if not isinstance(value, (str, int)):
            raise CorpusError(f"field '{key}' must be a string")
    intent = str(values["intent"]).strip()
    if not intent:
        raise CorpusError("empty intent")

    annotated = str(values["annot_utt"])
    try:
        utt = parse_annotated(annotated, intent)
    except AnnotationError as e:
        raise CorpusError(f"annot_utt: {e}")
    text = normalize_whitespace(str(values["utt"]))
    if utt.plain != text:
        raise CorpusError(
            f"annot_utt without markup ({utt.plain!r}) differs from utt ({text!r})"
        )
    return Example(
        id=str(values["id"]),
        locale=str(values["locale"]),
        domain=str(values["scenario"]),
        intent=intent,
        text=text,
        annotated_text=annotated,
    )


@instrumented("corpus.load")
def load_corpus(
    path: str,
    locale: str,
    intent_filter: Optional[Iterable[str]] = None,
    strict: bool = False,
) -> Dataset:
    """Read a MASSIVE line-record file, keeping ``locale`` records in the filter.

    Malformed records become diagnostics (or raise with ``strict``); they
    are never dropped silently.
    """
    wanted = None if intent_filter is None else frozenset(intent_filter)
    if wanted is not None and not wanted:
        raise EmptyResultError("intent filter is empty; nothing can match")

    examples: List[Example] = []
    diagnostics: List[LoadDiagnostic] = []
    seen_ids = set()

    def reject(line: int, message: str) -> None:
        if strict:
            raise CorpusError(message, line=line)
        diagnostics.append(LoadDiagnostic(line, message))
        logger.warning("%s: line %d rejected: %s", path, line, message)

    try:
        lines = list(iter_lines(path))
    except FileNotFoundError:
        raise CorpusError(f"corpus file not found: {path}")
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusError(f"cannot read corpus file {path}: {e}")

    for number, line in lines:
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            reject(number, f"malformed JSON: {e.msg}")
            continue
        if not isinstance(record, dict):
            reject(number, "record is not a JSON object")
            continue
        if record.get("locale") != locale:
            continue
        if wanted is not None and str(record.get("intent", "")).strip() not in wanted:
            continue
        try:
            example = _example_from_record(record)
        except CorpusError as e:
            reject(number, e.message)
            continue
        if example.id in seen_ids:
            reject(number, f"duplicate id {example.id!r}")
            continue
        seen_ids.add(example.id)
        examples.append(example)

    if not examples:
        raise EmptyResultError(
            f"no records in {path} match locale {locale!r}"
            + (" and the intent filter" if wanted is not None else "")
        )

    provenance = f"{path} locale={locale}"
    if wanted is not None:
        provenance += f" intents={len(wanted)}"
    return Dataset(locale, tuple(examples), provenance, tuple(diagnostics))


def write_corpus(dataset: Dataset, path: str) -> int:
    return write_records(path, (e.to_record() for e in dataset.examples))


def resolve_intent_filter(value: Optional[str]) -> Optional[FrozenSet[str]]:
    """Accept a named filter, a comma list, or ``@file`` with one intent per line."""
    if value is None:
        return None
    if value in NAMED_INTENT_FILTERS:
        return NAMED_INTENT_FILTERS[value]
    if value.startswith("@"):
        try:
            with open(value[1:], encoding="utf-8") as fh:
                return frozenset(line.strip() for line in fh if line.strip())
        except OSError as e:
            raise UsageError(f"cannot read intent list {value[1:]}: {e}")
    return frozenset(part.strip() for part in value.split(",") if part.strip())


# --------------------------------------------------------
# Split
# --------------------------------------------------------
def train_size(ratio: float, n: int) -> int:
    """round-half-up of ratio * n"""
    return int(math.floor(ratio * n + 0.5))


@instrumented("corpus.split")
def split(dataset: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset]:
    if not len(dataset):
        raise CorpusError("cannot split an empty dataset")
    if not 0.0 < spec.train_ratio < 1.0:
        raise UsageError(f"train ratio must lie in (0, 1), got {spec.train_ratio}")

    rng = SplitMix64(spec.seed)
    examples = dataset.examples
    train_positions = set()

    if spec.stratified:
        groups: Dict[str, List[int]] = defaultdict(list)
        for pos, example in enumerate(examples):
            groups[example.intent].append(pos)
        for intent in sorted(groups):
            members = groups[intent]
            rng.shuffle(members)
            train_positions.update(members[:train_size(spec.train_ratio, len(members))])
    else:
        order = rng.permutation(len(examples))
        train_positions.update(order[:train_size(spec.train_ratio, len(examples))])

    train = tuple(e for pos, e in enumerate(examples) if pos in train_positions)
    test = tuple(e for pos, e in enumerate(examples) if pos not in train_positions)
    mode = "stratified" if spec.stratified else "random"
    note = f"ratio={spec.train_ratio} seed={spec.seed} {mode}"
    return (
        Dataset(dataset.locale, train, f"{dataset.provenance} | train {note}"),
        Dataset(dataset.locale, test, f"{dataset.provenance} | test {note}"),
    )


# --------------------------------------------------------
# Stats
# --------------------------------------------------------
@instrumented("corpus.stats")
def stats(dataset: Dataset) -> DatasetStats:
    per_domain = Counter(e.domain for e in dataset.examples)
    per_intent = Counter(e.intent for e in dataset.examples)
    return DatasetStats(
        per_domain=dict(sorted(per_domain.items())),
        per_intent=dict(sorted(per_intent.items())),
        total=len(dataset.examples),
    )


def compare_with_reference(
    observed: DatasetStats, reference: Dict[str, Tuple[str, int]] = MASSIVE_FR_EXTRACT
) -> List[str]:
    """Count mismatches against a reference intent table; empty means exact match."""
    problems = []
    for intent, (_, expected) in sorted(reference.items()):
        got = observed.per_intent.get(intent, 0)
        if got != expected:
            problems.append(f"{intent}: expected {expected}, got {got}")
    for intent in sorted(set(observed.per_intent) - set(reference)):
        problems.append(f"{intent}: not in the reference table")
    expected_total = sum(count for _, count in reference.values())
    if observed.total != expected_total:
        problems.append(f"total: expected {expected_total}, got {observed.total}")
    return problems
