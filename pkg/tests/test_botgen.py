import csv
import os

import pytest
import yaml
from openpyxl import Workbook

from xproject.annot import parse_annotated
from xproject.botgen import (
    PipelineTemplate,
    generate_project,
    load_ontology,
    ontology_from_dataset,
    read_nlu_examples,
    validate_scaffold,
    write_ontology,
)
from xproject.botgen.generator import DOMAIN_FILE, NLU_FILE, RULES_FILE, SCAFFOLD_FILES
from xproject.corpus import load_corpus
from xproject.errors import DataError, OntologyError

ONTOLOGY = {
    "alarm": {
        "alarm_set": (["wake me up at [time : seven am]", "set an alarm for [date : tomorrow]"], ["Alarm set."]),
        "alarm_remove": (["remove my [time : six am] alarm", "cancel all alarms"], ["Alarm removed."]),
        "alarm_query": (["which alarms do i have", "is there an alarm at [time : noon]"], []),
    },
    "transport": {
        "transport_taxi": (
            ["call a taxi to [place_name : the airport]", "book a cab for [time : eight]", "i need a taxi"],
            ["A taxi is on its way."],
        ),
        "transport_query": (["when is the next train to [place_name : Thiès]"], ["Let me check."]),
    },
    "weather": {
        "weather_query": (["what is the weather in [place_name : Dakar] [date : today]"], ["It is sunny."]),
        "weather_alert": (["warn me if it [weather_descriptor : rains]"], ["I will warn you."]),
    },
}


def write_tree(root, ontology=ONTOLOGY):
    for domain, intents in ontology.items():
        os.makedirs(root / domain, exist_ok=True)
        for intent, (examples, responses) in intents.items():
            with open(root / domain / f"{intent}.csv", "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["example", "response"])
                for i in range(max(len(examples), len(responses))):
                    writer.writerow([
                        examples[i] if i < len(examples) else "",
                        responses[i] if i < len(responses) else "",
                    ])
    return str(root)


@pytest.fixture
def ontology_dir(tmp_path):
    return write_tree(tmp_path / "ontology")


# --------------------------------------------------------
# Ontology
# --------------------------------------------------------
def test_load_csv_tree(ontology_dir):
    ontology = load_ontology(ontology_dir)

    assert [d.name for d in ontology.domains] == ["alarm", "transport", "weather"]
    assert len(ontology.intents) == 7
    taxi = next(s for s in ontology.intents if s.intent_name == "transport_taxi")
    assert len(taxi.examples) == 3
    assert taxi.response_templates == ("A taxi is on its way.",)
    assert ontology.labels == ["date", "place_name", "time", "weather_descriptor"]


def test_single_intent_tree(tmp_path):
    root = write_tree(tmp_path / "one", {"transport": {"transport_taxi": ONTOLOGY["transport"]["transport_taxi"]}})
    ontology = load_ontology(root)
    assert len(ontology.domains) == 1
    assert len(ontology.intents[0].examples) == 3


def test_duplicate_intent_across_domains(tmp_path):
    root = write_tree(tmp_path / "dup", {
        "alarm": {"alarm_set": (["wake me"], [])},
        "clock": {"alarm_set": (["set the clock"], [])},
    })
    with pytest.raises(OntologyError) as info:
        load_ontology(root)
    assert info.value.intent == "alarm_set"


def test_empty_directory_has_no_domains(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(OntologyError, match="no domains found"):
        load_ontology(str(tmp_path / "empty"))


def test_intent_without_examples(tmp_path):
    root = write_tree(tmp_path / "bare", {"alarm": {"alarm_set": ([], ["ok"])}})
    with pytest.raises(OntologyError, match="no examples"):
        load_ontology(root)


def test_unparsable_example_names_its_row(tmp_path):
    root = write_tree(tmp_path / "bad", {"alarm": {"alarm_set": (["wake me", "at [time : seven"], [])}})
    with pytest.raises(OntologyError) as info:
        load_ontology(root)
    assert (info.value.domain, info.value.intent, info.value.row) == ("alarm", "alarm_set", 3)
    assert "alarm/alarm_set row 3" in str(info.value)


def test_workbook_domain(tmp_path):
    workbook = Workbook()
    first = workbook.active
    first.title = "alarm_set"
    first.append(["example", "response"])
    first.append(["wake me at [time : seven]", "Done."])
    first.append(["set an alarm", None])
    second = workbook.create_sheet("alarm_query")
    second.append(["what alarms are set", "Here they are."])
    path = tmp_path / "alarm.xlsx"
    workbook.save(path)

    ontology = load_ontology(str(path))

    domain = ontology.domains[0]
    assert domain.name == "alarm"
    assert [s.intent_name for s in domain.intents] == ["alarm_query", "alarm_set"]
    assert domain.intents[0].examples == ("what alarms are set",)
    assert domain.intents[1].examples == ("wake me at [time : seven]", "set an alarm")
    assert domain.intents[1].response_templates == ("Done.",)


def test_ontology_from_corpus_round_trips_through_csv(tmp_path, small_corpus):
    ontology = ontology_from_dataset(load_corpus(small_corpus, "fr-FR"))
    assert [d.name for d in ontology.domains] == ["alarm", "hotel", "play", "transport", "weather"]

    written = write_ontology(ontology, str(tmp_path / "tree"))
    assert len(written) == 5
    assert load_ontology(str(tmp_path / "tree")) == ontology


# --------------------------------------------------------
# Generation
# --------------------------------------------------------
def read_yaml(out_dir, relative):
    with open(os.path.join(out_dir, relative), encoding="utf-8") as fh:
        return yaml.safe_load(fh)


def test_generate_writes_consistent_scaffold(tmp_path, ontology_dir):
    out = str(tmp_path / "bot")
    scaffold = generate_project(load_ontology(ontology_dir), out_dir=out)

    assert sorted(scaffold.files) == sorted(SCAFFOLD_FILES)
    assert all(os.path.isfile(os.path.join(out, f)) for f in SCAFFOLD_FILES)
    domain = read_yaml(out, DOMAIN_FILE)
    assert domain["entities"] == ["date", "place_name", "time", "weather_descriptor"]
    assert len(domain["intents"]) == 7
    assert "utter_default" in domain["responses"]
    assert scaffold.warnings == ["intent alarm_query has no response; a placeholder was generated"]

    report = validate_scaffold(out)
    assert report.clean, report.violations


def test_generation_is_byte_identical(tmp_path, ontology_dir):
    ontology = load_ontology(ontology_dir)
    generate_project(ontology, out_dir=str(tmp_path / "a"))
    generate_project(ontology, out_dir=str(tmp_path / "b"))

    for relative in SCAFFOLD_FILES:
        with open(tmp_path / "a" / relative, "rb") as fa, open(tmp_path / "b" / relative, "rb") as fb:
            content = fa.read()
            assert content == fb.read()
            assert b"\r\n" not in content


def test_nlu_round_trip(tmp_path, ontology_dir):
    ontology = load_ontology(ontology_dir)
    out = str(tmp_path / "bot")
    generate_project(ontology, out_dir=out)

    examples = read_nlu_examples(read_yaml(out, NLU_FILE))
    assert examples == {sheet.intent_name: sheet.utterances() for sheet in ontology.intents}
    taxi = examples["transport_taxi"][0]
    assert taxi == parse_annotated("call a taxi to [place_name : the airport]", "transport_taxi")


def test_nlu_uses_training_markup(tmp_path, ontology_dir):
    out = str(tmp_path / "bot")
    generate_project(load_ontology(ontology_dir), out_dir=out)
    text = open(os.path.join(out, NLU_FILE), encoding="utf-8").read()
    assert "- call a taxi to [the airport](place_name)" in text
    assert "Thiès" in text


def test_config_carries_the_template(tmp_path, ontology_dir):
    out = str(tmp_path / "bot")
    generate_project(load_ontology(ontology_dir), out_dir=out, language="wo")

    config = read_yaml(out, "config.yml")
    assert config["language"] == "wo"
    assert [stage["name"] for stage in config["pipeline"]] == [
        "WhitespaceTokenizer", "LanguageModelFeaturizer", "DIETClassifier", "FallbackClassifier",
    ]
    assert config["pipeline"][3]["threshold"] == 0.7


def test_template_from_yaml(tmp_path):
    path = tmp_path / "template.yml"
    path.write_text(
        "pipeline:\n"
        "  - {role: tokenizer, name: WhitespaceTokenizer}\n"
        "  - {role: featurizer, name: CountVectorsFeaturizer, analyzer: char_wb}\n"
        "  - {role: classifier, name: DIETClassifier, epochs: 5}\n",
        encoding="utf-8",
    )
    template = PipelineTemplate.load(str(path))
    assert template.stages[1].settings == {"analyzer": "char_wb"}


@pytest.mark.parametrize(
    "pipeline",
    [
        [{"role": "tokenizer", "name": "SpacyTokenizer"}, {"role": "featurizer", "name": "F"},
         {"role": "classifier", "name": "C"}],
        [{"role": "featurizer", "name": "F"}, {"role": "classifier", "name": "C"}],
        [{"role": "classifier", "name": "C"}, {"role": "tokenizer", "name": "T"},
         {"role": "featurizer", "name": "F"}],
    ],
)
def test_bad_templates(pipeline):
    with pytest.raises(DataError):
        PipelineTemplate.from_mapping({"pipeline": pipeline})


# --------------------------------------------------------
# Validation
# --------------------------------------------------------
def test_unknown_intent_in_rules(tmp_path, ontology_dir):
    out = str(tmp_path / "bot")
    generate_project(load_ontology(ontology_dir), out_dir=out)
    rules = read_yaml(out, RULES_FILE)
    rules["rules"].append({"rule": "ghost", "steps": [{"intent": "ghost_intent"}, {"action": "utter_alarm_set"}]})
    with open(os.path.join(out, RULES_FILE), "w", encoding="utf-8") as fh:
        yaml.safe_dump(rules, fh)

    report = validate_scaffold(out)
    assert len(report.violations) == 1
    assert "ghost_intent" in report.violations[0]


def test_missing_nlu_file(tmp_path, ontology_dir):
    out = str(tmp_path / "bot")
    generate_project(load_ontology(ontology_dir), out_dir=out)
    os.remove(os.path.join(out, NLU_FILE))

    report = validate_scaffold(out)
    assert report.violations == [f"{NLU_FILE}: file is missing"]
    assert report.to_dict()["clean"] is False


def test_entity_closure_is_checked(tmp_path, ontology_dir):
    out = str(tmp_path / "bot")
    generate_project(load_ontology(ontology_dir), out_dir=out)
    domain = read_yaml(out, DOMAIN_FILE)
    domain["entities"] = ["date", "place_name", "time", "unused"]
    with open(os.path.join(out, DOMAIN_FILE), "w", encoding="utf-8") as fh:
        yaml.safe_dump(domain, fh, allow_unicode=True)

    violations = validate_scaffold(out).violations
    assert any("weather_descriptor is not declared" in v for v in violations)
    assert any("unused is never used" in v for v in violations)


def test_missing_output_directory(tmp_path):
    report = validate_scaffold(str(tmp_path / "nowhere"))
    assert len(report.violations) == 4
