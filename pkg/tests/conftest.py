import json
import random
import threading
import time

import pytest

from xproject.annot import AnnotatedUtterance, assemble, serialize, strip_markup
from xproject.translator.base import TranslationBackend, TranslationRequest

BOOK_ROOM = "book me a room from [start_date : July 15] to [end_date : July 24]"

WORDS = [
    "book", "me", "a", "room", "from", "to", "réveil", "été", "demain", "Dakar",
    "ñandú", "jëf", "naka", "xalaat", "Ölçek", "日本", "ça", "va", "wake", "up",
    "l'heure", "7h30", "s'il", "plaît", "quoi", "météo", "señal", "über",
]
LABELS = ["date", "time", "place_name", "event_name", "person", "food_type", "weather_descriptor"]
INTENTS = ["alarm_set", "calendar_query", "weather_query", "play_music", "transport_taxi"]
SCENARIOS = {
    "alarm_set": "alarm",
    "calendar_query": "calendar",
    "weather_query": "weather",
    "play_music": "play",
    "transport_taxi": "transport",
}


def massive_record(example_id, annot_utt, intent="book_room", scenario="hotel", locale="fr-FR"):
    return {
        "id": str(example_id),
        "locale": locale,
        "scenario": scenario,
        "intent": intent,
        "utt": strip_markup(annot_utt),
        "annot_utt": annot_utt,
    }


def random_utterance(rng: random.Random, intent: str = "") -> AnnotatedUtterance:
    """0-5 non-overlapping spans over random (partly non-ASCII) words."""
    segments = []
    for _ in range(rng.randint(0, 5)):
        segments.append((" ".join(rng.choice(WORDS) for _ in range(rng.randint(0, 3))), None))
        segments.append((" ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3))), rng.choice(LABELS)))
    segments.append((" ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 4))), None))
    return assemble([(f" {text} ", label) if label is None else (text, label) for text, label in segments], intent)


def random_records(rng: random.Random, n: int, locale: str = "fr-FR", min_spans: int = 0):
    records = []
    while len(records) < n:
        intent = rng.choice(INTENTS)
        utt = random_utterance(rng, intent)
        if len(utt.spans) < min_spans:
            continue
        records.append(massive_record(f"ex{len(records)}", serialize(utt), intent, SCENARIOS[intent], locale))
    return records


@pytest.fixture
def write_massive(tmp_path):
    """Write MASSIVE line records (dicts or raw strings) to a file and return its path."""

    def write(records, name="corpus.jsonl"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for record in records:
                fh.write(record if isinstance(record, str) else json.dumps(record, ensure_ascii=False))
                fh.write("\n")
        return str(path)

    return write


@pytest.fixture
def small_corpus(write_massive):
    records = [
        massive_record("1", BOOK_ROOM),
        massive_record("2", "réveille-moi à [time : sept heures]", "alarm_set", "alarm"),
        massive_record("3", "quel temps fait-il à [place_name : Dakar] [date : demain]", "weather_query", "weather"),
        massive_record("4", "mets de la musique", "play_music", "play"),
        massive_record("5", "appelle un taxi pour [place_name : l'aéroport]", "transport_taxi", "transport"),
        massive_record("6", "wake me up", "alarm_set", "alarm", locale="en-US"),
    ]
    return write_massive(records)


class CountingBackend(TranslationBackend):
    """Identity translation that records every text it was asked for."""

    backend_id = "counting"

    def __init__(self, delay: float = 0.0, fail_on=()):
        self.calls = []
        self.delay = delay
        self.fail_on = set(fail_on)
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()

    def translate_text(self, request: TranslationRequest) -> str:
        with self._lock:
            self.calls.append(request.text)
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            if self.delay:
                time.sleep(self.delay)
            if request.text in self.fail_on:
                raise RuntimeError(f"cannot translate {request.text!r}")
            return request.text
        finally:
            with self._lock:
                self.in_flight -= 1


@pytest.fixture
def counting_backend():
    return CountingBackend()
