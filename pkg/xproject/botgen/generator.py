"""Rasa project scaffold generation.

Writes ``config.yml``, ``domain.yml``, ``data/nlu.yml`` and ``data/rules.yml``
(YAML format version 3.1). Output depends only on the ontology and the
template: domains then intents in alphabetical order, LF line endings.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import yaml

from xproject.annot import to_training_markup
from xproject.auto.decorators import instrumented
from xproject.botgen.ontology import IntentSheet, Ontology
from xproject.errors import AnnotationError, DataError, OntologyError

logger = logging.getLogger(__name__)

FORMAT_VERSION = "3.1"
CONFIG_FILE = "config.yml"
DOMAIN_FILE = "domain.yml"
NLU_FILE = "data/nlu.yml"
RULES_FILE = "data/rules.yml"
SCAFFOLD_FILES = (CONFIG_FILE, DOMAIN_FILE, NLU_FILE, RULES_FILE)

FALLBACK_INTENT = "nlu_fallback"
FALLBACK_RESPONSE = "utter_default"
FALLBACK_TEXT = "Sorry, I did not understand that. Could you rephrase?"

ROLE_ORDER = ("tokenizer", "featurizer", "classifier", "fallback")
MANDATORY_ROLES = ("tokenizer", "featurizer", "classifier")
LANGUAGE_SPECIFIC_STAGES = frozenset({
    "SpacyNLP", "SpacyTokenizer", "SpacyFeaturizer", "SpacyEntityExtractor",
    "MitieNLP", "MitieTokenizer", "MitieFeaturizer", "MitieIntentClassifier",
    "JiebaTokenizer",
})


# --------------------------------------------------------
# Pipeline template
# --------------------------------------------------------
@dataclass
class PipelineStage:
    role: str
    name: str
    settings: Dict[str, Any] = field(default_factory=dict)

    def to_config(self) -> Dict[str, Any]:
        return {"name": self.name, **self.settings}


@dataclass
class PipelineTemplate:
    stages: List[PipelineStage]
    policies: List[Dict[str, Any]] = field(default_factory=lambda: [{"name": "RulePolicy"}])
    recipe: str = "default.v1"

    def validate(self) -> None:
        roles = [s.role for s in self.stages]
        for role in roles:
            if role not in ROLE_ORDER:
                raise DataError(f"pipeline stage role {role!r} is not one of {', '.join(ROLE_ORDER)}")
        for role in MANDATORY_ROLES:
            if role not in roles:
                raise DataError(f"pipeline template is missing a {role} stage")
        ranks = [ROLE_ORDER.index(r) for r in roles]
        if ranks != sorted(ranks):
            raise DataError("pipeline stages must run tokenizer, featurizer, classifier, fallback in that order")
        for stage in self.stages:
            if stage.name in LANGUAGE_SPECIFIC_STAGES:
                raise DataError(f"pipeline stage {stage.name} is language-specific")

    @classmethod
    def default(cls) -> "PipelineTemplate":
        return cls(stages=[
            PipelineStage("tokenizer", "WhitespaceTokenizer"),
            PipelineStage("featurizer", "LanguageModelFeaturizer",
                          {"model_name": "bert", "model_weights": "rasa/LaBSE"}),
            PipelineStage("classifier", "DIETClassifier", {"epochs": 100}),
            PipelineStage("fallback", "FallbackClassifier",
                          {"threshold": 0.7, "ambiguity_threshold": 0.1}),
        ])

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "PipelineTemplate":
        if not isinstance(data, dict) or not isinstance(data.get("pipeline"), list):
            raise DataError("pipeline template needs a 'pipeline:' list")
        stages = []
        for i, entry in enumerate(data["pipeline"]):
            if not isinstance(entry, dict) or "name" not in entry or "role" not in entry:
                raise DataError(f"pipeline entry {i} needs 'role' and 'name'")
            settings = {k: v for k, v in entry.items() if k not in ("role", "name")}
            stages.append(PipelineStage(str(entry["role"]), str(entry["name"]), settings))
        policies = data.get("policies", [{"name": "RulePolicy"}])
        if not isinstance(policies, list):
            raise DataError("'policies:' must be a list")
        template = cls(stages, policies, str(data.get("recipe", "default.v1")))
        template.validate()
        return template

    @classmethod
    def load(cls, path: str) -> "PipelineTemplate":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except FileNotFoundError:
            raise DataError(f"pipeline template not found: {path}")
        except yaml.YAMLError as e:
            raise DataError(f"pipeline template {path} is not valid YAML: {e}")
        return cls.from_mapping(data)


# --------------------------------------------------------
# YAML emission
# --------------------------------------------------------
class _Literal(str):
    pass


class _ScaffoldDumper(yaml.SafeDumper):
    pass


def _literal_representer(dumper, value):
    return dumper.represent_scalar("tag:yaml.org,2002:str", value, style="|")


_ScaffoldDumper.add_representer(_Literal, _literal_representer)


def dump_yaml(payload: Dict[str, Any]) -> str:
    return yaml.dump(
        payload,
        Dumper=_ScaffoldDumper,
        sort_keys=False,
        allow_unicode=True,
        default_flow_style=False,
        indent=2,
        width=4096,
    )


# --------------------------------------------------------
# Generation
# --------------------------------------------------------
@dataclass
class ProjectScaffold:
    out_dir: str
    files: Dict[str, str]
    warnings: List[str] = field(default_factory=list)

    def path(self, relative: str) -> str:
        return os.path.join(self.out_dir, relative)


def placeholder_response(intent: str) -> str:
    return f"Placeholder response for intent {intent}."


def response_name(intent: str) -> str:
    return f"utter_{intent}"


def _sorted_sheets(ontology: Ontology) -> List[IntentSheet]:
    return [
        sheet
        for domain in sorted(ontology.domains, key=lambda d: d.name)
        for sheet in sorted(domain.intents, key=lambda s: s.intent_name)
    ]


def _nlu(sheets: Sequence[IntentSheet]) -> Dict[str, Any]:
    entries = []
    for sheet in sheets:
        lines = []
        for row, utt in enumerate(sheet.utterances(), start=1):
            try:
                lines.append(f"- {to_training_markup(utt)}")
            except AnnotationError as e:
                raise OntologyError(e.message, intent=sheet.intent_name, row=row)
        entries.append({"intent": sheet.intent_name, "examples": _Literal("\n".join(lines) + "\n")})
    return {"version": FORMAT_VERSION, "nlu": entries}


def _domain(sheets: Sequence[IntentSheet], entities: List[str], warnings: List[str]) -> Dict[str, Any]:
    responses: Dict[str, Any] = {}
    for sheet in sheets:
        texts = list(sheet.response_templates)
        if not texts:
            texts = [placeholder_response(sheet.intent_name)]
            warnings.append(f"intent {sheet.intent_name} has no response; a placeholder was generated")
        responses[response_name(sheet.intent_name)] = [{"text": t} for t in texts]
    responses[FALLBACK_RESPONSE] = [{"text": FALLBACK_TEXT}]
    return {
        "version": FORMAT_VERSION,
        "intents": [sheet.intent_name for sheet in sheets],
        "entities": entities,
        "responses": responses,
        "session_config": {"session_expiration_time": 60, "carry_over_slots_to_new_session": True},
    }


def _rules(sheets: Sequence[IntentSheet]) -> Dict[str, Any]:
    rules = [
        {
            "rule": f"respond to {sheet.intent_name}",
            "steps": [{"intent": sheet.intent_name}, {"action": response_name(sheet.intent_name)}],
        }
        for sheet in sheets
    ]
    rules.append({
        "rule": "ask to rephrase when nlu confidence is low",
        "steps": [{"intent": FALLBACK_INTENT}, {"action": FALLBACK_RESPONSE}],
    })
    return {"version": FORMAT_VERSION, "rules": rules}


def _config(template: PipelineTemplate, language: str) -> Dict[str, Any]:
    return {
        "recipe": template.recipe,
        "language": language,
        "pipeline": [stage.to_config() for stage in template.stages],
        "policies": template.policies,
    }


@instrumented("botgen.generate_project")
def generate_project(
    ontology: Ontology,
    template: Optional[PipelineTemplate] = None,
    out_dir: str = ".",
    language: str = "xx",
) -> ProjectScaffold:
    ontology.validate()
    template = template or PipelineTemplate.default()
    template.validate()

    sheets = _sorted_sheets(ontology)
    warnings: List[str] = []
    files = {
        CONFIG_FILE: dump_yaml(_config(template, language)),
        DOMAIN_FILE: dump_yaml(_domain(sheets, ontology.labels, warnings)),
        NLU_FILE: dump_yaml(_nlu(sheets)),
        RULES_FILE: dump_yaml(_rules(sheets)),
    }

    for relative, content in files.items():
        path = os.path.join(out_dir, relative)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)

    for warning in warnings:
        logger.warning(warning)
    logger.info("generated %d intents into %s", len(sheets), out_dir)
    return ProjectScaffold(out_dir, files, warnings)
