import json
import os

import pytest

from xproject import __version__
from xproject.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def intent_predictions(tmp_path):
    path = tmp_path / "intents.jsonl"
    records = [
        {"example_id": "1", "gold_intent": "A", "predicted_intent": "A", "confidence": 0.9},
        {"example_id": "2", "gold_intent": "A", "predicted_intent": "B", "confidence": 0.4},
        {"example_id": "3", "gold_intent": "B", "predicted_intent": "B", "confidence": 0.8},
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return str(path)


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0
    assert __version__ in out


def test_stats(capsys, small_corpus):
    code, out, _ = run(capsys, "stats", small_corpus)
    assert code == 0
    payload = json.loads(out)
    assert payload["total"] == 5
    assert payload["per_domain"]["weather"] == 1


def test_stats_reference_mismatch_is_data_error(capsys, small_corpus):
    code, out, err = run(capsys, "stats", small_corpus, "--reference")
    assert code == 2
    assert json.loads(out)["reference_mismatches"]
    assert "differ from the reference" in err


def test_missing_corpus(capsys, tmp_path):
    code, _, err = run(capsys, "stats", str(tmp_path / "absent.jsonl"))
    assert code == 2
    assert "error" in err


def test_split_is_deterministic(capsys, tmp_path, small_corpus):
    outputs = []
    for name in ("a", "b"):
        train, test = tmp_path / f"{name}.train.jsonl", tmp_path / f"{name}.test.jsonl"
        code, out, _ = run(capsys, "split", small_corpus, "--seed", "7", "--train", str(train), "--test", str(test))
        assert code == 0
        assert json.loads(out)["train"]["examples"] == 4
        outputs.append((train.read_bytes(), test.read_bytes()))
    assert outputs[0] == outputs[1]


def test_project_identity(capsys, tmp_path, small_corpus):
    out_path = tmp_path / "wo.jsonl"
    code, out, _ = run(capsys, "project", small_corpus, "--backend", "identity", "--src", "fr", "--tgt", "wo",
                       "--tgt-locale", "wo-SN", "--out", str(out_path))

    assert code == 0
    summary = json.loads(out)
    assert summary["success_rate"] == 1.0
    assert summary["projected"] == 5
    report = json.loads((tmp_path / "wo.report.json").read_text(encoding="utf-8"))
    assert report["success_rate"] == 1.0
    assert (tmp_path / "wo.quarantine.jsonl").read_text(encoding="utf-8") == ""
    first = json.loads(out_path.read_text(encoding="utf-8").splitlines()[0])
    assert first["locale"] == "wo-SN"
    assert first["annot_utt"] == "book me a room from [start_date : July 15] to [end_date : July 24]"


def test_project_quarantine_threshold(capsys, caplog, tmp_path, small_corpus):
    out_path = tmp_path / "wo.jsonl"
    args = ["project", small_corpus, "--backend", "fault", "--drop-prob", "1", "--out", str(out_path)]

    code, out, _ = run(capsys, *args)
    assert code == 0
    assert json.loads(out)["quarantined_by_reason"]["MISSING_ID"] == 4

    code, _, err = run(capsys, *args, "--max-quarantine-rate", "0.5")
    assert code == 2
    assert "quarantine rate" in err
    run_levels = {r.levelname for r in caplog.records if r.name == "xproject.run"}
    assert {"WARNING", "ERROR"} <= run_levels
    assert len((tmp_path / "wo.quarantine.jsonl").read_text(encoding="utf-8").splitlines()) == 4


def test_project_with_cache_and_config_file(capsys, tmp_path, small_corpus):
    config = tmp_path / "xproject.toml"
    config.write_text('[run]\ntgt = "wo"\nparallel = 3\n\n[backend]\nkind = "pseudo"\n', encoding="utf-8")
    cache = tmp_path / "cache.jsonl"
    args = ["--config", str(config), "project", small_corpus, "--out", str(tmp_path / "out.jsonl"),
            "--cache", str(cache)]

    code, out, _ = run(capsys, *args)
    assert code == 0
    assert json.loads(out)["backend_id"] == "pseudo"
    cached = len(cache.read_text(encoding="utf-8").splitlines())
    assert cached > 0

    assert run(capsys, *args)[0] == 0
    assert len(cache.read_text(encoding="utf-8").splitlines()) == cached


@pytest.mark.parametrize(
    "extra",
    [
        ["--drop-prob", "0.5"],
        ["--backend", "identity", "--mt-url", "http://mt"],
        ["--backend", "identity", "--fault-base", "reverse"],
        ["--backend", "remote"],
        ["--backend", "identity", "--src", "wo", "--tgt", "wo"],
        ["--no-such-flag"],
    ],
)
def test_usage_errors_exit_1(capsys, tmp_path, small_corpus, extra):
    code, _, _ = run(capsys, "project", small_corpus, "--out", str(tmp_path / "out.jsonl"), *extra)
    assert code == 1


def test_markers(capsys, small_corpus):
    code, out, _ = run(capsys, "markers", small_corpus, "--schemes", "brackets,dollars", "--backend", "fault",
                       "--drop-marker-prob", "1", "--fault-keep", "dollars")
    assert code == 0
    payload = json.loads(out)
    assert payload["ranking"] == ["dollars", "brackets"]
    assert payload["per_scheme"]["brackets"]["preservation_rate"] == 0.0
    assert payload["excluded"] == 1


def test_markers_rejects_unknown_scheme(capsys, small_corpus):
    assert run(capsys, "markers", small_corpus, "--schemes", "smoke")[0] == 1


def test_eval_intents(capsys, tmp_path, intent_predictions):
    confusion_csv = tmp_path / "confusion.csv"
    code, out, err = run(capsys, "--pretty", "eval", "intents", intent_predictions,
                         "--confusion-csv", str(confusion_csv))

    assert code == 0
    payload = json.loads(out)
    assert round(payload["report"]["macro_f1"], 3) == 0.667
    assert payload["confusion"]["counts"] == [[1, 1], [0, 1]]
    assert "0.667" in err
    assert confusion_csv.read_text(encoding="utf-8").startswith("gold\\predicted,A,B")


def test_eval_compare(capsys, intent_predictions):
    code, out, _ = run(capsys, "eval", "intents", intent_predictions, "--label", "fr",
                       "--compare", f"wo={intent_predictions}")
    assert code == 0
    assert json.loads(out)["compared"]["wo"]["macro_f1"] == pytest.approx(2 / 3)


def test_eval_slots(capsys, tmp_path):
    path = tmp_path / "slots.jsonl"
    path.write_text(json.dumps({"example_id": "1", "gold_spans": [["date", 1, 3]],
                                "predicted_spans": [["date", 1, 3], ["time", 5, 7]], "length": 10}) + "\n",
                    encoding="utf-8")
    code, out, _ = run(capsys, "eval", "slots", str(path))
    assert code == 0
    assert json.loads(out)["report"]["micro_f1"] == pytest.approx(2 / 3)


def test_ontology_generate_validate(capsys, tmp_path, small_corpus):
    tree, bot = str(tmp_path / "tree"), str(tmp_path / "bot")

    assert run(capsys, "ontology", small_corpus, "--out", tree)[0] == 0
    code, out, _ = run(capsys, "generate", tree, "--out", bot, "--language", "wo")
    assert code == 0
    assert len(json.loads(out)["warnings"]) == 5

    code, out, _ = run(capsys, "validate", bot)
    assert code == 0
    assert json.loads(out)["clean"] is True

    os.remove(os.path.join(bot, "data", "rules.yml"))
    code, out, _ = run(capsys, "validate", bot)
    assert code == 2
    assert json.loads(out)["violations"] == ["data/rules.yml: file is missing"]
