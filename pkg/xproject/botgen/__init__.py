from .generator import PipelineStage, PipelineTemplate, ProjectScaffold, generate_project
from .ontology import Domain, IntentSheet, Ontology, load_ontology, ontology_from_dataset, write_ontology
from .validation import ScaffoldValidation, read_nlu_examples, validate_scaffold

__all__ = [
    "Domain",
    "IntentSheet",
    "Ontology",
    "PipelineStage",
    "PipelineTemplate",
    "ProjectScaffold",
    "ScaffoldValidation",
    "generate_project",
    "load_ontology",
    "ontology_from_dataset",
    "read_nlu_examples",
    "validate_scaffold",
    "write_ontology",
]
