import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set

import yaml

from xproject.annot import AnnotatedUtterance, parse_training_markup
from xproject.botgen.generator import (
    CONFIG_FILE,
    DOMAIN_FILE,
    FALLBACK_INTENT,
    NLU_FILE,
    RULES_FILE,
    response_name,
)
from xproject.errors import AnnotationError

logger = logging.getLogger(__name__)


@dataclass
class ScaffoldValidation:
    out_dir: str
    violations: List[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {"out_dir": self.out_dir, "clean": self.clean, "violations": self.violations}


def _load(out_dir: str, relative: str, violations: List[str]) -> Optional[Dict[str, Any]]:
    path = os.path.join(out_dir, relative)
    if not os.path.isfile(path):
        violations.append(f"{relative}: file is missing")
        return None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        violations.append(f"{relative}: not valid YAML ({e})")
        return None
    if not isinstance(data, dict):
        violations.append(f"{relative}: top level is not a mapping")
        return None
    return data


def read_nlu_examples(data: Dict[str, Any], violations: Optional[List[str]] = None) -> Dict[str, List[AnnotatedUtterance]]:
    """intent → parsed training examples of an NLU file mapping."""
    violations = violations if violations is not None else []
    examples: Dict[str, List[AnnotatedUtterance]] = {}
    for i, entry in enumerate(data.get("nlu") or []):
        if not isinstance(entry, dict) or "intent" not in entry:
            violations.append(f"{NLU_FILE}: entry {i} has no intent")
            continue
        intent = entry["intent"]
        parsed = examples.setdefault(intent, [])
        for line in str(entry.get("examples") or "").splitlines():
            line = line.strip()
            if not line:
                continue
            if not line.startswith("- "):
                violations.append(f"{NLU_FILE}: intent {intent}: example line {line!r} is not a list item")
                continue
            try:
                parsed.append(parse_training_markup(line[2:], intent))
            except AnnotationError as e:
                violations.append(f"{NLU_FILE}: intent {intent}: {e.message}")
    return examples


def validate_scaffold(out_dir: str) -> ScaffoldValidation:
    """Re-read a generated project and check its cross-file consistency."""
    report = ScaffoldValidation(out_dir)
    v = report.violations
    config = _load(out_dir, CONFIG_FILE, v)
    domain = _load(out_dir, DOMAIN_FILE, v)
    nlu = _load(out_dir, NLU_FILE, v)
    rules = _load(out_dir, RULES_FILE, v)

    if config is not None and not isinstance(config.get("pipeline"), list):
        v.append(f"{CONFIG_FILE}: no pipeline list")

    intents: Set[str] = set()
    entities: Set[str] = set()
    responses: Set[str] = set()
    if domain is not None:
        intents = set(domain.get("intents") or [])
        entities = set(domain.get("entities") or [])
        responses = set((domain.get("responses") or {}).keys())
        for intent in sorted(intents):
            if response_name(intent) not in responses:
                v.append(f"{DOMAIN_FILE}: intent {intent} has no {response_name(intent)} response")

    if nlu is not None:
        examples = read_nlu_examples(nlu, v)
        used = {span.label for utts in examples.values() for utt in utts for span in utt.spans}
        if domain is not None:
            for intent in sorted(set(examples) - intents):
                v.append(f"{NLU_FILE}: intent {intent} is not declared in {DOMAIN_FILE}")
            for intent in sorted(intents - set(examples)):
                v.append(f"{DOMAIN_FILE}: intent {intent} has no NLU examples")
            for label in sorted(used - entities):
                v.append(f"{NLU_FILE}: entity {label} is not declared in {DOMAIN_FILE}")
            for label in sorted(entities - used):
                v.append(f"{DOMAIN_FILE}: entity {label} is never used in {NLU_FILE}")
        for intent, utts in sorted(examples.items()):
            if not utts:
                v.append(f"{NLU_FILE}: intent {intent} has no examples")

    if rules is not None:
        for i, rule in enumerate(rules.get("rules") or []):
            name = rule.get("rule", f"#{i}") if isinstance(rule, dict) else f"#{i}"
            steps = rule.get("steps") if isinstance(rule, dict) else None
            if not isinstance(steps, list):
                v.append(f"{RULES_FILE}: rule {name} has no steps")
                continue
            for step in steps:
                if not isinstance(step, dict):
                    v.append(f"{RULES_FILE}: rule {name} has a malformed step")
                elif "intent" in step and domain is not None:
                    if step["intent"] not in intents and step["intent"] != FALLBACK_INTENT:
                        v.append(f"{RULES_FILE}: rule {name} references unknown intent {step['intent']}")
                elif "action" in step and domain is not None:
                    if step["action"] not in responses:
                        v.append(f"{RULES_FILE}: rule {name} references unknown action {step['action']}")

    if report.clean:
        logger.info("scaffold %s is consistent", out_dir)
    else:
        logger.warning("scaffold %s has %d violations", out_dir, len(v))
    return report

