"""Chatbot ontology: domains → intents → annotated examples + responses.

Canonical input is a CSV tree ``<root>/<domain>/<intent>.csv`` with header
``example,response``. A workbook ``<domain>.xlsx`` (one sheet per intent,
column A example, column B response) loads into the same structure.
"""

import csv
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

from openpyxl import load_workbook

from xproject.annot import AnnotatedUtterance, parse_annotated
from xproject.auto.decorators import instrumented
from xproject.corpus import Dataset
from xproject.errors import AnnotationError, OntologyError

logger = logging.getLogger(__name__)

CSV_HEADER = ("example", "response")


@dataclass(frozen=True)
class IntentSheet:
    intent_name: str
    examples: Tuple[str, ...] = ()
    response_templates: Tuple[str, ...] = ()

    def utterances(self) -> List[AnnotatedUtterance]:
        return [parse_annotated(e, self.intent_name) for e in self.examples]


@dataclass(frozen=True)
class Domain:
    name: str
    intents: Tuple[IntentSheet, ...] = ()


@dataclass(frozen=True)
class Ontology:
    domains: Tuple[Domain, ...] = field(default_factory=tuple)

    @property
    def intents(self) -> List[IntentSheet]:
        return [sheet for domain in self.domains for sheet in domain.intents]

    @property
    def labels(self) -> List[str]:
        return sorted({span.label for sheet in self.intents for utt in sheet.utterances() for span in utt.spans})

    def validate(self) -> None:
        if not self.domains:
            raise OntologyError("no domains found")
        domain_names = set()
        owner: Dict[str, str] = {}
        for domain in self.domains:
            if domain.name in domain_names:
                raise OntologyError("domain name is used twice", domain=domain.name)
            domain_names.add(domain.name)
            if not domain.intents:
                raise OntologyError("domain has no intents", domain=domain.name)
            for sheet in domain.intents:
                if sheet.intent_name in owner:
                    raise OntologyError(
                        f"intent is also defined in domain {owner[sheet.intent_name]!r}",
                        domain=domain.name, intent=sheet.intent_name,
                    )
                owner[sheet.intent_name] = domain.name
                if not sheet.examples:
                    raise OntologyError("intent has no examples", domain=domain.name, intent=sheet.intent_name)


def _sheet(domain: str, intent: str, rows: List[Tuple[int, str, str]]) -> IntentSheet:
    """``rows`` are (spreadsheet row number, example, response)."""
    examples: List[str] = []
    responses: List[str] = []
    for number, example, response in rows:
        example = (example or "").strip()
        response = (response or "").strip()
        if example:
            try:
                parse_annotated(example, intent)
            except AnnotationError as e:
                raise OntologyError(e.message, domain=domain, intent=intent, row=number)
            examples.append(example)
        if response:
            responses.append(response)
    return IntentSheet(intent, tuple(examples), tuple(responses))


def _csv_rows(path: Path, domain: str, intent: str) -> List[Tuple[int, str, str]]:
    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header[:2]) != CSV_HEADER:
            raise OntologyError("CSV header must be 'example,response'", domain=domain, intent=intent, row=1)
        rows = []
        for number, row in enumerate(reader, start=2):
            cells = (row + ["", ""])[:2]
            rows.append((number, cells[0], cells[1]))
        return rows


def _load_csv_domain(directory: Path) -> Domain:
    sheets = [
        _sheet(directory.name, path.stem, _csv_rows(path, directory.name, path.stem))
        for path in sorted(directory.glob("*.csv"))
    ]
    return Domain(directory.name, tuple(sheets))


def _load_workbook_domain(path: Path) -> Domain:
    try:
        workbook = load_workbook(filename=path, read_only=True, data_only=True)
    except Exception as e:
        raise OntologyError(f"cannot open workbook {path}: {e}", domain=path.stem)
    sheets = []
    try:
        for sheet_name in sorted(workbook.sheetnames):
            rows = []
            for number, row in enumerate(workbook[sheet_name].iter_rows(max_col=2, values_only=True), start=1):
                cells = [("" if v is None else str(v)) for v in (tuple(row) + (None, None))[:2]]
                if number == 1 and cells[0].strip().lower() == "example":
                    continue
                rows.append((number, cells[0], cells[1]))
            sheets.append(_sheet(path.stem, sheet_name, rows))
    finally:
        workbook.close()
    return Domain(path.stem, tuple(sheets))


@instrumented("botgen.load_ontology")
def load_ontology(path: str) -> Ontology:
    root = Path(path)
    if root.is_file():
        if root.suffix.lower() != ".xlsx":
            raise OntologyError(f"{path} is neither a directory nor an .xlsx workbook")
        domains = [_load_workbook_domain(root)]
    elif root.is_dir():
        domains = []
        for entry in sorted(root.iterdir()):
            if entry.is_dir() and any(entry.glob("*.csv")):
                domains.append(_load_csv_domain(entry))
            elif entry.is_file() and entry.suffix.lower() == ".xlsx":
                domains.append(_load_workbook_domain(entry))
    else:
        raise OntologyError(f"ontology path not found: {path}")

    ontology = Ontology(tuple(domains))
    ontology.validate()
    logger.info("loaded ontology from %s: %d domains, %d intents",
                path, len(ontology.domains), len(ontology.intents))
    return ontology


def ontology_from_dataset(dataset: Dataset) -> Ontology:
    """One domain per scenario, one intent sheet per intent, no responses."""
    grouped: Dict[str, Dict[str, List[str]]] = defaultdict(lambda: defaultdict(list))
    for example in dataset:
        grouped[example.domain][example.intent].append(example.annotated_text)
    domains = tuple(
        Domain(name, tuple(IntentSheet(intent, tuple(examples)) for intent, examples in sorted(intents.items())))
        for name, intents in sorted(grouped.items())
    )
    ontology = Ontology(domains)
    ontology.validate()
    return ontology


def write_ontology(ontology: Ontology, root: str) -> List[str]:
    """Write the CSV tree; returns the written paths."""
    written = []
    for domain in ontology.domains:
        directory = os.path.join(root, domain.name)
        os.makedirs(directory, exist_ok=True)
        for sheet in domain.intents:
            path = os.path.join(directory, f"{sheet.intent_name}.csv")
            depth = max(len(sheet.examples), len(sheet.response_templates))
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_HEADER)
                for i in range(depth):
                    writer.writerow([
                        sheet.examples[i] if i < len(sheet.examples) else "",
                        sheet.response_templates[i] if i < len(sheet.response_templates) else "",
                    ])
            written.append(path)
    return written
