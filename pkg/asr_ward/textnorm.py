"""Text cleaning applied to reference and hypothesis transcripts before
alignment and term matching: casing, punctuation stripping, stemming and
sentence segmentation."""

from dataclasses import dataclass, field
import re
import string

from asr_ward.models import Utterance


PUNCTUATION = frozenset(string.punctuation + "“”‘’«»‹›„‚–—―…·")

SUFFIXES = ("ing", "ed", "es", "s", "ly")
MIN_STEM_LENGTH = 3
SIBILANT_ENDINGS = ("s", "x", "z", "ch", "sh")
NO_PLURAL_S_AFTER = ("s", "u", "i")

# Bases that get their trailing 'e' back after a suffix is stripped
E_RESTORE_EXCEPTIONS = {
    "tak": "take",
    "mak": "make",
    "giv": "give",
    "hav": "have",
    "lik": "like",
    "caus": "cause",
    "diseas": "disease",
    "sav": "save",
    "driv": "drive",
    "liv": "live",
    "mov": "move",
    "chang": "change",
    "com": "come",
    "clos": "close",
    "increas": "increase",
    "decreas": "decrease",
    "releas": "release",
    "los": "lose",
    "wak": "wake",
    "writ": "write",
}

ABBREVIATIONS = frozenset(
    [
        "dr.",
        "mr.",
        "mrs.",
        "ms.",
        "st.",
        "jr.",
        "sr.",
        "prof.",
        "vs.",
        "etc.",
        "e.g.",
        "i.e.",
        "approx.",
        "no.",
    ]
)

_SENTENCE_END = re.compile(r"[.?!]+[\"')\]”’]*(?=\s+[A-Z]|\s*$)")


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    source_index: int


@dataclass
class Segment:
    tokens: list[Token]
    start_s: float
    end_s: float
    speaker: str = ""

    def __post_init__(self):
        if self.start_s < 0:
            raise ValueError(f"Segment start {self.start_s} is negative")
        if self.tokens and self.end_s <= self.start_s:
            raise ValueError(
                f"Segment ends at {self.end_s} before it starts at {self.start_s}"
            )
        indices = [token.source_index for token in self.tokens]
        if any(a >= b for a, b in zip(indices, indices[1:])):
            raise ValueError("Segment token source indices must strictly increase")

    @property
    def norms(self) -> list[str]:
        return [token.norm for token in self.tokens]

    @property
    def text(self) -> str:
        return " ".join(token.surface for token in self.tokens)


def _strip_suffix(word: str) -> str:
    for suffix in SUFFIXES:
        if not word.endswith(suffix):
            continue
        base = word[: -len(suffix)]
        if len(base) < MIN_STEM_LENGTH:
            continue
        if suffix == "es" and not base.endswith(SIBILANT_ENDINGS):
            continue
        if suffix == "s" and base.endswith(NO_PLURAL_S_AFTER):
            continue
        return E_RESTORE_EXCEPTIONS.get(base, base)
    return word


def stem(word: str) -> str:
    """Rule-based suffix stripper, applied until the word stops changing.

    Running the rules to a fixpoint is what makes stem(stem(w)) == stem(w),
    e.g. "feelings" -> "feeling" -> "feel".
    """
    while (stemmed := _strip_suffix(word)) != word:
        word = stemmed
    return word


def _clean_word(word: str) -> str:
    return "".join(c for c in word.lower() if c not in PUNCTUATION)


def normalize(text: str, offset: int = 0) -> list[Token]:
    """Split on whitespace, lowercase, strip punctuation and stem.

    Pure punctuation words are dropped, but `source_index` still counts them,
    so it always points into the original word stream. `offset` shifts every
    index, which lets callers number tokens across a whole conversation.
    """
    tokens = []
    for i, word in enumerate(text.split()):
        cleaned = _clean_word(word)
        if not cleaned:
            continue
        tokens.append(Token(surface=word, norm=stem(cleaned), source_index=offset + i))
    return tokens


def sentence_split(text: str) -> list[str]:
    sentences = []
    start = 0
    for match in _SENTENCE_END.finditer(text):
        words = text[start : match.end()].split()
        if words and words[-1].lower() in ABBREVIATIONS:
            continue
        sentence = text[start : match.end()].strip()
        if sentence:
            sentences.append(sentence)
        start = match.end()

    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


@dataclass
class TokenStream:
    """All tokens of one side of a conversation, partitioned into segments"""

    tokens: list[Token] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list)


def segment_utterances(utterances: list[Utterance]) -> TokenStream:
    """Chunk utterances into sentence segments with interpolated timestamps.

    A sentence's time span is the utterance span scaled by the position of its
    words within the utterance.
    """
    stream = TokenStream()
    word_offset = 0
    for utterance in utterances:
        word_count = len(utterance.text.split())
        duration = utterance.end_s - utterance.start_s
        words_seen = 0
        for sentence in sentence_split(utterance.text):
            sentence_words = len(sentence.split())
            tokens = normalize(sentence, offset=word_offset + words_seen)
            if tokens:
                stream.tokens.extend(tokens)
                stream.segments.append(
                    Segment(
                        tokens=tokens,
                        start_s=utterance.start_s
                        + duration * words_seen / word_count,
                        end_s=utterance.start_s
                        + duration * (words_seen + sentence_words) / word_count,
                        speaker=utterance.speaker,
                    )
                )
            words_seen += sentence_words
        word_offset += word_count
    return stream
