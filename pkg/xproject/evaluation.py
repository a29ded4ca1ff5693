"""Intent and slot evaluation from gold + prediction files.

Intent scores are per-class precision/recall/F1 over single-label
predictions. Slot F1 is span-exact: a predicted ``(label, start, end)`` counts
only if a gold span has the same three values. Slot accuracy is per
character position, each position carrying its covering label or OUTSIDE.
Denominators of zero give 0.
"""

import csv
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from rich.console import Console
from rich.table import Table

from xproject.annot import parse_annotated
from xproject.auto.decorators import instrumented
from xproject.errors import AnnotationError, EvaluationError
from xproject.utils.records import iter_lines

logger = logging.getLogger(__name__)

OUTSIDE = "O"
SLOT_NOTE = "span-exact F1; character-level accuracy"
HISTOGRAM_BINS = 10

SpanTriple = Tuple[str, int, int]


# --------------------------------------------------------
# Inputs
# --------------------------------------------------------
@dataclass(frozen=True)
class IntentPrediction:
    example_id: str
    gold_intent: str
    predicted_intent: str
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise EvaluationError(
                f"{self.example_id}: confidence {self.confidence} outside [0, 1]"
            )

    @property
    def correct(self) -> bool:
        return self.gold_intent == self.predicted_intent


@dataclass(frozen=True)
class SlotPrediction:
    example_id: str
    gold_spans: Tuple[SpanTriple, ...] = ()
    predicted_spans: Tuple[SpanTriple, ...] = ()
    # plain-text length; defaults to the largest span end
    length: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "gold_spans", tuple(tuple(s) for s in self.gold_spans))
        object.__setattr__(self, "predicted_spans", tuple(tuple(s) for s in self.predicted_spans))
        for label, start, end in self.gold_spans + self.predicted_spans:
            if not isinstance(start, int) or not isinstance(end, int) or not 0 <= start < end:
                raise EvaluationError(f"{self.example_id}: invalid span {label}@({start},{end})")
            if self.length is not None and end > self.length:
                raise EvaluationError(
                    f"{self.example_id}: span {label}@({start},{end}) exceeds text length {self.length}"
                )

    @property
    def text_length(self) -> int:
        if self.length is not None:
            return self.length
        return max((end for _, _, end in self.gold_spans + self.predicted_spans), default=0)


def slot_prediction_from_markup(example_id: str, gold_markup: str, pred_markup: str) -> SlotPrediction:
    """Build a SlotPrediction from two annotated strings of the same sentence."""
    try:
        gold = parse_annotated(gold_markup, "")
        pred = parse_annotated(pred_markup, "")
    except AnnotationError as e:
        raise EvaluationError(f"{example_id}: {e.message}")
    if gold.plain != pred.plain:
        raise EvaluationError(f"{example_id}: gold and predicted markup differ in plain text")
    return SlotPrediction(
        example_id,
        tuple(s.as_tuple() for s in gold.spans),
        tuple(s.as_tuple() for s in pred.spans),
        len(gold.plain),
    )


def _unique_ids(preds: Sequence, kind: str) -> None:
    if not preds:
        raise EvaluationError(f"no {kind} predictions to evaluate")
    seen = set()
    for p in preds:
        if p.example_id in seen:
            raise EvaluationError(f"duplicate example_id {p.example_id!r} in {kind} predictions")
        seen.add(p.example_id)


# --------------------------------------------------------
# Reports
# --------------------------------------------------------
@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_dict(self) -> Dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "support": self.support}


def _prf(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return precision, recall, f1


@dataclass
class ClassReport:
    per_class: Dict[str, ClassScore] = field(default_factory=dict)
    macro_f1: float = 0.0
    micro_precision: float = 0.0
    micro_recall: float = 0.0
    micro_f1: float = 0.0
    accuracy: float = 0.0
    n: int = 0
    note: str = ""

    @classmethod
    def from_counts(cls, counts: Mapping[str, Mapping[str, int]], accuracy: float, n: int, note: str = ""):
        per_class = {}
        for label in sorted(counts):
            c = counts[label]
            p, r, f = _prf(c["tp"], c["fp"], c["fn"])
            per_class[label] = ClassScore(p, r, f, c["tp"] + c["fn"], c["tp"], c["fp"], c["fn"])
        supported = [s.f1 for s in per_class.values() if s.support > 0]
        tp = sum(c["tp"] for c in counts.values())
        fp = sum(c["fp"] for c in counts.values())
        fn = sum(c["fn"] for c in counts.values())
        mp, mr, mf = _prf(tp, fp, fn)
        return cls(
            per_class=per_class,
            macro_f1=sum(supported) / len(supported) if supported else 0.0,
            micro_precision=mp,
            micro_recall=mr,
            micro_f1=mf,
            accuracy=accuracy,
            n=n,
            note=note,
        )

    def to_dict(self) -> Dict[str, object]:
        payload = {
            "per_class": {label: s.to_dict() for label, s in self.per_class.items()},
            "macro_f1": self.macro_f1,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "accuracy": self.accuracy,
            "n": self.n,
        }
        if self.note:
            payload["note"] = self.note
        return payload


def _counter():
    return defaultdict(lambda: {"tp": 0, "fp": 0, "fn": 0})


@instrumented("evaluation.intent_report")
def intent_report(preds: Sequence[IntentPrediction]) -> ClassReport:
    _unique_ids(preds, "intent")
    counts = _counter()
    correct = 0
    for p in preds:
        if p.correct:
            counts[p.gold_intent]["tp"] += 1
            correct += 1
        else:
            counts[p.gold_intent]["fn"] += 1
            counts[p.predicted_intent]["fp"] += 1
    return ClassReport.from_counts(counts, correct / len(preds), len(preds))


def _char_labels(spans: Iterable[SpanTriple], length: int) -> List[str]:
    labels = [OUTSIDE] * length
    # first span by start wins where predictions overlap
    for label, start, end in sorted(spans, key=lambda s: (s[1], s[2], s[0]), reverse=True):
        for pos in range(start, min(end, length)):
            labels[pos] = label
    return labels


@instrumented("evaluation.slot_report")
def slot_report(preds: Sequence[SlotPrediction]) -> ClassReport:
    _unique_ids(preds, "slot")
    counts = _counter()
    positions = 0
    matching = 0
    for p in preds:
        gold = set(p.gold_spans)
        pred = set(p.predicted_spans)
        for label, _, _ in gold & pred:
            counts[label]["tp"] += 1
        for label, _, _ in pred - gold:
            counts[label]["fp"] += 1
        for label, _, _ in gold - pred:
            counts[label]["fn"] += 1

        length = p.text_length
        gold_chars = _char_labels(gold, length)
        pred_chars = _char_labels(pred, length)
        positions += length
        matching += sum(1 for g, q in zip(gold_chars, pred_chars) if g == q)

    accuracy = matching / positions if positions else 0.0
    return ClassReport.from_counts(counts, accuracy, len(preds), SLOT_NOTE)


@dataclass
class ConfusionMatrix:
    labels: List[str]
    counts: List[List[int]]
    # mean predicted confidence per cell, 0 where the cell is empty
    mean_confidence: List[List[float]]

    def cell(self, gold: str, pred: str) -> int:
        return self.counts[self.labels.index(gold)][self.labels.index(pred)]

    def to_dict(self) -> Dict[str, object]:
        return {"labels": self.labels, "counts": self.counts, "mean_confidence": self.mean_confidence}

    def write_csv(self, path: str, values: str = "counts") -> None:
        matrix = self.counts if values == "counts" else self.mean_confidence
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["gold\\predicted", *self.labels])
            for label, row in zip(self.labels, matrix):
                writer.writerow([label, *row])


@instrumented("evaluation.confusion")
def confusion(preds: Sequence[IntentPrediction]) -> ConfusionMatrix:
    _unique_ids(preds, "intent")
    labels = sorted({p.gold_intent for p in preds} | {p.predicted_intent for p in preds})
    index = {label: i for i, label in enumerate(labels)}
    size = len(labels)
    counts = [[0] * size for _ in range(size)]
    totals = [[0.0] * size for _ in range(size)]
    for p in preds:
        g, q = index[p.gold_intent], index[p.predicted_intent]
        counts[g][q] += 1
        totals[g][q] += p.confidence
    means = [
        [totals[g][q] / counts[g][q] if counts[g][q] else 0.0 for q in range(size)]
        for g in range(size)
    ]
    return ConfusionMatrix(labels, counts, means)


@dataclass
class ConfidenceHistogram:
    correct_counts: List[int] = field(default_factory=lambda: [0] * HISTOGRAM_BINS)
    incorrect_counts: List[int] = field(default_factory=lambda: [0] * HISTOGRAM_BINS)

    @property
    def bins(self) -> List[Tuple[float, float]]:
        return [(b / HISTOGRAM_BINS, (b + 1) / HISTOGRAM_BINS) for b in range(HISTOGRAM_BINS)]

    @property
    def total(self) -> int:
        return sum(self.correct_counts) + sum(self.incorrect_counts)

    def to_dict(self) -> Dict[str, object]:
        return {
            "bins": [list(b) for b in self.bins],
            "correct_counts": self.correct_counts,
            "incorrect_counts": self.incorrect_counts,
        }

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_start", "bin_end", "correct", "incorrect"])
            for (lo, hi), ok, bad in zip(self.bins, self.correct_counts, self.incorrect_counts):
                writer.writerow([f"{lo:.1f}", f"{hi:.1f}", ok, bad])


def confidence_bin(confidence: float) -> int:
    return min(int(confidence * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)


@instrumented("evaluation.confidence_histogram")
def confidence_histogram(preds: Sequence[IntentPrediction]) -> ConfidenceHistogram:
    _unique_ids(preds, "intent")
    histogram = ConfidenceHistogram()
    for p in preds:
        b = confidence_bin(p.confidence)
        if p.correct:
            histogram.correct_counts[b] += 1
        else:
            histogram.incorrect_counts[b] += 1
    return histogram


# --------------------------------------------------------
# Tables
# --------------------------------------------------------
def _render(table: Table, width: int = 120) -> str:
    buffer = io.StringIO()
    Console(file=buffer, width=width, no_color=True, highlight=False).print(table)
    return buffer.getvalue()


def compare_reports(reports: Mapping[str, ClassReport], slots: bool = False) -> Table:
    """Side-by-side F1 table, one column per named report (e.g. per language)."""
    names = list(reports)
    table = Table()
    table.add_column("slot" if slots else "intent")
    for name in names:
        table.add_column(name, justify="right")

    labels = sorted({label for r in reports.values() for label in r.per_class})
    for label in labels:
        row = []
        for name in names:
            score = reports[name].per_class.get(label)
            row.append(f"{score.f1:.3f}" if score is not None else "-")
        table.add_row(label, *row)

    table.add_section()
    if slots:
        table.add_row("micro avg", *(f"{reports[n].micro_f1:.3f}" for n in names))
        table.add_row("macro avg", *(f"{reports[n].macro_f1:.3f}" for n in names))
        table.add_row("accuracy", *(f"{reports[n].accuracy:.3f}" for n in names))
    else:
        table.add_row("macro avg", *(f"{reports[n].macro_f1:.3f}" for n in names))
    return table


def render_comparison(reports: Mapping[str, ClassReport], slots: bool = False) -> str:
    return _render(compare_reports(reports, slots))


def report_table(report: ClassReport, slots: bool = False) -> Table:
    table = Table(caption=report.note or None)
    table.add_column("slot" if slots else "intent")
    for column in ("precision", "recall", "f1-score", "support"):
        table.add_column(column, justify="right")
    for label, s in report.per_class.items():
        table.add_row(label, f"{s.precision:.3f}", f"{s.recall:.3f}", f"{s.f1:.3f}", str(s.support))
    table.add_section()
    table.add_row("micro avg", f"{report.micro_precision:.3f}", f"{report.micro_recall:.3f}",
                  f"{report.micro_f1:.3f}", str(report.n))
    table.add_row("macro avg", "", "", f"{report.macro_f1:.3f}", str(report.n))
    table.add_row("accuracy", "", "", f"{report.accuracy:.3f}", str(report.n))
    return table


def render_report(report: ClassReport, slots: bool = False) -> str:
    return _render(report_table(report, slots))


# --------------------------------------------------------
# Loaders
# --------------------------------------------------------
def _records(path: str):
    try:
        for number, line in iter_lines(path):
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise EvaluationError(f"{path} line {number}: malformed JSON: {e.msg}")
            if not isinstance(record, dict):
                raise EvaluationError(f"{path} line {number}: record is not a JSON object")
            yield number, record
    except FileNotFoundError:
        raise EvaluationError(f"prediction file not found: {path}")


def load_intent_predictions(path: str) -> List[IntentPrediction]:
    preds = []
    for number, record in _records(path):
        try:
            preds.append(IntentPrediction(
                str(record["example_id"]),
                str(record["gold_intent"]),
                str(record["predicted_intent"]),
                float(record.get("confidence", 1.0)),
            ))
        except KeyError as e:
            raise EvaluationError(f"{path} line {number}: missing key {e.args[0]!r}")
        except (TypeError, ValueError) as e:
            raise EvaluationError(f"{path} line {number}: {e}")
    return preds


def _spans(value, where: str) -> Tuple[SpanTriple, ...]:
    try:
        return tuple((str(label), int(start), int(end)) for label, start, end in value)
    except (TypeError, ValueError):
        raise EvaluationError(f"{where}: spans must be [label, start, end] triples")


def load_slot_predictions(path: str) -> List[SlotPrediction]:
    """Line records ``{example_id, gold_spans, predicted_spans[, length]}`` or
    ``{example_id, gold, predicted}`` with annotated strings."""
    preds = []
    for number, record in _records(path):
        where = f"{path} line {number}"
        if "example_id" not in record:
            raise EvaluationError(f"{where}: missing key 'example_id'")
        example_id = str(record["example_id"])
        if "gold" in record and "predicted" in record:
            preds.append(slot_prediction_from_markup(example_id, record["gold"], record["predicted"]))
            continue
        if "gold_spans" not in record or "predicted_spans" not in record:
            raise EvaluationError(f"{where}: needs gold_spans and predicted_spans")
        length = record.get("length")
        preds.append(SlotPrediction(
            example_id,
            _spans(record["gold_spans"], where),
            _spans(record["predicted_spans"], where),
            int(length) if length is not None else None,
        ))
    return preds
