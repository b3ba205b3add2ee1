"""Resampling of ASR substitution errors for the simulated-error test set.

Each mistranscribed hypothesis word is swapped for another plausible
confusion: a vocabulary word with the same Soundex key or within a small
edit distance of it.
"""

from dataclasses import dataclass, field
from typing import Callable
import logging

import jellyfish
import numpy

from asr_ward import alignment, util
from asr_ward.models import AlignParams, EntailmentExample
from asr_ward.textnorm import normalize

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


DEFAULT_MAX_EDIT = 2


def soundex_key(word: str) -> str | None:
    if not word[:1].isalpha():
        return None
    return jellyfish.soundex(word)


@dataclass
class ConfusionModel:
    vocab: list[str]
    phonetic_key: Callable[[str], str | None] = soundex_key
    max_edit: int = DEFAULT_MAX_EDIT
    seed: int = 0
    _candidates: dict[str, list[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.max_edit < 1:
            raise ValueError(f"max_edit must be >= 1, got {self.max_edit}")
        self.vocab = sorted(set(self.vocab))
        self._keys = {word: self.phonetic_key(word) for word in self.vocab}

    def candidates(self, word: str) -> list[str]:
        """Sorted confusions for `word`, never including the word itself"""
        if word not in self._candidates:
            key = self.phonetic_key(word)
            self._candidates[word] = [
                v
                for v in self.vocab
                if v != word
                and (
                    (key is not None and self._keys[v] == key)
                    or jellyfish.levenshtein_distance(v, word) <= self.max_edit
                )
            ]
        return self._candidates[word]


def build_confusion(
    vocab: list[str], max_edit: int = DEFAULT_MAX_EDIT, seed: int = 0
) -> ConfusionModel:
    if not vocab:
        raise ValueError("Confusion vocabulary is empty")
    return ConfusionModel(vocab=vocab, max_edit=max_edit, seed=seed)


def simulate_example(
    example: EntailmentExample,
    cm: ConfusionModel,
    params: AlignParams = AlignParams(),
) -> tuple[EntailmentExample, int]:
    """Resample the substituted words of one example. Returns the new example
    and the number of substitutions left as-is for lack of candidates."""
    if example.label == 0:
        return example, 0

    ref_tokens = normalize(example.ref_text)
    hyp_tokens = normalize(example.hyp_text)
    local_trace, _ = alignment.smith_waterman(ref_tokens, hyp_tokens, params)
    trace = alignment.complete_trace(ref_tokens, hyp_tokens, local_trace, params)

    rng = numpy.random.default_rng(util.derive_seed(cm.seed, example.id))
    words = example.hyp_text.split()
    skipped = 0
    for op in trace:
        if op.kind != alignment.OpKind.SUBSTITUTE:
            continue
        hyp_token = hyp_tokens[op.hyp_index]
        ref_norm = ref_tokens[op.ref_index].norm
        pool = [
            c
            for c in cm.candidates(hyp_token.norm)
            if c not in (hyp_token.norm, ref_norm)
        ]
        if not pool:
            skipped += 1
            continue
        words[hyp_token.source_index] = pool[int(rng.integers(len(pool)))]

    hyp_text = " ".join(words)
    if hyp_text == example.hyp_text:
        return example, skipped
    # Confidences only describe the original hypothesis words
    return example.model_copy(
        update={"hyp_text": hyp_text, "hyp_confidence": None}
    ), skipped


def simulate_errors(
    test: list[EntailmentExample],
    cm: ConfusionModel,
    params: AlignParams = AlignParams(),
) -> list[EntailmentExample]:
    simulated = []
    total_skipped = 0
    for example in test:
        new_example, skipped = simulate_example(example, cm, params)
        simulated.append(new_example)
        total_skipped += skipped
    if total_skipped:
        logger.warning(f"{total_skipped} substitutions had no confusion candidates")
    return simulated
