"""Deterministic mock backends.

- identity: returns the text unchanged
- reverse: reverses whitespace tokens (``$..$`` tokens move but stay intact)
- pseudo: uppercases every non-identifier token and appends a fixed suffix token
- fault: wraps any of the above and corrupts identifiers / marker units
  according to a seeded FaultProfile

Every mock is a pure function of (seed, request.seq, request.text).
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from xproject.errors import UsageError
from xproject.translator.base import CacheKey, TranslationBackend, TranslationRequest
from xproject.utils.prng import SplitMix64, derive_seed

IDENTIFIER_TOKEN_RE = re.compile(r"\$0\d+\$")
_DOLLAR_TOKEN_RE = re.compile(r"^\$[^$\s]+\$$")

PSEUDO_SUFFIX = "~"

_DIGIT_TO_LETTER = str.maketrans("0123456789", "olzeasbtBg")
_DIGIT_SHIFT = str.maketrans("0123456789", "1234567890")


class IdentityBackend(TranslationBackend):
    backend_id = "identity"

    def translate_text(self, request: TranslationRequest) -> str:
        return request.text


class ReverseBackend(TranslationBackend):
    backend_id = "reverse"

    def translate_text(self, request: TranslationRequest) -> str:
        return " ".join(reversed(request.text.split()))


class PseudoBackend(TranslationBackend):
    backend_id = "pseudo"

    def translate_text(self, request: TranslationRequest) -> str:
        tokens = [
            tok if _DOLLAR_TOKEN_RE.match(tok) else tok.upper()
            for tok in request.text.split()
        ]
        tokens.append(PSEUDO_SUFFIX)
        return " ".join(tokens)


MOCKS = {
    "identity": IdentityBackend,
    "reverse": ReverseBackend,
    "pseudo": PseudoBackend,
}


def make_mock(name: str) -> TranslationBackend:
    try:
        return MOCKS[name]()
    except KeyError:
        raise UsageError(f"unknown mock backend '{name}'")


# --------------------------------------------------------
# Fault injection
# --------------------------------------------------------
@dataclass(frozen=True)
class FaultProfile:
    drop_identifier_prob: float = 0.0
    mutate_digit_to_letter_prob: float = 0.0
    translate_marker_content_prob: float = 0.0
    duplicate_identifier_prob: float = 0.0
    seed: int = 0
    # strips the delimiters of non-identifier marker units
    drop_marker_prob: float = 0.0

    def __post_init__(self):
        for name in (
            "drop_identifier_prob",
            "mutate_digit_to_letter_prob",
            "translate_marker_content_prob",
            "duplicate_identifier_prob",
            "drop_marker_prob",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise UsageError(f"fault probability {name}={value} outside [0, 1]")
        if self.seed < 0:
            raise UsageError("fault seed must be an unsigned integer")

    @property
    def is_clean(self) -> bool:
        return not any((
            self.drop_identifier_prob,
            self.mutate_digit_to_letter_prob,
            self.translate_marker_content_prob,
            self.duplicate_identifier_prob,
            self.drop_marker_prob,
        ))


@dataclass(frozen=True)
class FaultEvent:
    kind: str  # drop | mutate | translate | duplicate | drop_marker | translate_content
    unit: str
    position: int


class FaultBackend(TranslationBackend):
    """Applies a FaultProfile to the output of a base mock.

    Units are identifiers (``$0N$``) plus, when ``markers`` is given, any
    ``open … close`` wrapped chunk. Per identifier four uniforms are drawn
    (drop, mutate, translate, duplicate); per marker unit two (drop_marker,
    translate_content), always in that order so the stream is stable.
    """

    def __init__(
        self,
        base: TranslationBackend,
        profile: FaultProfile,
        markers: Sequence[Tuple[str, str]] = (),
    ):
        self.base = base
        self.profile = profile
        self.markers = tuple(markers)
        self.backend_id = f"fault({base.backend_id},seed={profile.seed})"

        alternatives = [r"(?P<ident>\$0\d+\$)"]
        for k, (open_, close) in enumerate(self.markers):
            alternatives.append(
                rf"(?P<m{k}>{re.escape(open_)}(?P<c{k}>.+?){re.escape(close)})"
            )
        self._unit_re = re.compile("|".join(alternatives))

    def _rng(self, request: TranslationRequest) -> SplitMix64:
        return SplitMix64(derive_seed(self.profile.seed, request.seq, request.text))

    def _corrupt(self, text: str, rng: SplitMix64) -> Tuple[str, List[FaultEvent]]:
        p = self.profile
        events: List[FaultEvent] = []
        out: List[str] = []
        cursor = 0
        dropped = False

        for match in self._unit_re.finditer(text):
            out.append(text[cursor:match.start()])
            cursor = match.end()
            unit = match.group(0)

            if match.group("ident") is not None:
                drop, mutate, trans, dup = (rng.random() for _ in range(4))
                token = unit
                if drop < p.drop_identifier_prob:
                    events.append(FaultEvent("drop", unit, match.start()))
                    dropped = True
                    continue
                if mutate < p.mutate_digit_to_letter_prob:
                    events.append(FaultEvent("mutate", unit, match.start()))
                    token = "$" + unit[1:-1].translate(_DIGIT_TO_LETTER) + "$"
                elif trans < p.translate_marker_content_prob:
                    events.append(FaultEvent("translate", unit, match.start()))
                    token = "$" + unit[1:-1].translate(_DIGIT_SHIFT) + "$"
                if dup < p.duplicate_identifier_prob:
                    events.append(FaultEvent("duplicate", unit, match.start()))
                    token = f"{token} {token}"
                out.append(token)
                continue

            k = next(i for i in range(len(self.markers)) if match.group(f"m{i}") is not None)
            open_, close = self.markers[k]
            content = match.group(f"c{k}")
            drop_marker, trans = rng.random(), rng.random()
            if trans < p.translate_marker_content_prob:
                events.append(FaultEvent("translate_content", unit, match.start()))
                content = content.upper()
            if drop_marker < p.drop_marker_prob:
                events.append(FaultEvent("drop_marker", unit, match.start()))
                out.append(content)
            else:
                out.append(f"{open_}{content}{close}")

        out.append(text[cursor:])
        result = "".join(out)
        if dropped:
            result = " ".join(result.split())
        return result, events

    def plan(self, request: TranslationRequest) -> List[FaultEvent]:
        """The faults this backend applies to ``request`` (replay oracle)."""
        base_text = self.base.translate_text(request)
        _, events = self._corrupt(base_text, self._rng(request))
        return events

    def translate_text(self, request: TranslationRequest) -> str:
        base_text = self.base.translate_text(request)
        if self.profile.is_clean:
            return base_text
        corrupted, _ = self._corrupt(base_text, self._rng(request))
        return corrupted

    def cache_key(self, request: TranslationRequest) -> CacheKey:
        # output depends on seq as well as text
        return (f"{self.backend_id}#seq={request.seq}", request.src, request.tgt, request.text)


def build_mock_backend(
    name: str,
    fault: Optional[FaultProfile] = None,
    fault_base: str = "identity",
    markers: Sequence[Tuple[str, str]] = (),
) -> TranslationBackend:
    if name == "fault":
        return FaultBackend(make_mock(fault_base), fault or FaultProfile(), markers)
    return make_mock(name)
