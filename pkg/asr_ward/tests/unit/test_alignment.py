from unittest import TestCase
import functools
import itertools
import random

import pytest

from asr_ward import alignment, textnorm
from asr_ward.alignment import EditOp, OpKind
from asr_ward.errors import SegmentationMismatch
from asr_ward.models import AlignParams, Utterance


PARAMS = AlignParams()


def tokens_of(words):
    return [textnorm.Token(w, w, i) for i, w in enumerate(words)]


def global_score(ref, hyp, params=PARAMS):
    """Plain recursive global alignment score"""

    @functools.lru_cache(maxsize=None)
    def best(i, j):
        if i == 0:
            return j * params.gap_penalty
        if j == 0:
            return i * params.gap_penalty
        if ref[i - 1] == hyp[j - 1]:
            step = params.match_score
        else:
            step = params.mismatch_penalty
        return max(
            best(i - 1, j - 1) + step,
            best(i - 1, j) + params.gap_penalty,
            best(i, j - 1) + params.gap_penalty,
        )

    return best(len(ref), len(hyp))


def local_score_oracle(ref, hyp):
    """Best global score over every pair of non-empty substrings, floored at 0"""
    best = 0.0
    for a in range(len(ref)):
        for b in range(a + 1, len(ref) + 1):
            for c in range(len(hyp)):
                for d in range(c + 1, len(hyp) + 1):
                    best = max(best, global_score(ref[a:b], hyp[c:d]))
    return best


def local_scores_against(ref, params=PARAMS):
    """Best local alignment score of `ref` against any hypothesis, by recursion
    over hypothesis prefixes"""

    @functools.lru_cache(maxsize=None)
    def ending(i, hyp):
        """Best score of aligning a suffix of ref[:i] with a suffix of hyp,
        the empty alignment scoring 0"""
        best = 0.0
        if i and hyp:
            if ref[i - 1] == hyp[-1]:
                step = params.match_score
            else:
                step = params.mismatch_penalty
            best = max(best, ending(i - 1, hyp[:-1]) + step)
        if i:
            best = max(best, ending(i - 1, hyp) + params.gap_penalty)
        if hyp:
            best = max(best, ending(i, hyp[:-1]) + params.gap_penalty)
        return best

    @functools.lru_cache(maxsize=None)
    def best(hyp):
        score = max(ending(i, hyp) for i in range(len(ref) + 1))
        if hyp:
            score = max(score, best(hyp[:-1]))
        return score

    return best


def first_use_ordered(word, alphabet="abc"):
    """True when letters first appear in alphabet order, e.g. `abac` not `baca`"""
    seen = []
    for letter in word:
        if letter not in seen:
            seen.append(letter)
    return "".join(seen) == alphabet[: len(seen)]


def assert_valid_local_trace(trace):
    ref_indices = [op.ref_index for op in trace if op.ref_index is not None]
    hyp_indices = [op.hyp_index for op in trace if op.hyp_index is not None]
    for indices in (ref_indices, hyp_indices):
        assert indices == list(range(indices[0], indices[0] + len(indices)))


def stream_of(*utterances):
    return textnorm.segment_utterances(
        [
            Utterance(start_s=i * 10.0, end_s=i * 10.0 + 8.0, text=text)
            for i, text in enumerate(utterances)
        ]
    )


def align_texts(ref_texts, hyp_texts):
    ref = stream_of(*ref_texts)
    hyp = stream_of(*hyp_texts)
    return ref, hyp, alignment.align_transcripts(
        ref.tokens, hyp.tokens, ref.segments, hyp.segments, PARAMS
    )


class TestEditOp(TestCase):
    def test_index_rules(self):
        EditOp(OpKind.MATCH, 0, 0)
        EditOp(OpKind.INSERT, hyp_index=2)
        EditOp(OpKind.DELETE, ref_index=1)
        with pytest.raises(ValueError):
            EditOp(OpKind.SUBSTITUTE, 0, None)
        with pytest.raises(ValueError):
            EditOp(OpKind.INSERT, 0, 1)
        with pytest.raises(ValueError):
            EditOp(OpKind.DELETE, None, 1)


class TestSmithWaterman(TestCase):
    def test_identity(self):
        words = tokens_of("keep her on the symbicort".split())
        trace, score = alignment.smith_waterman(words, words, PARAMS)
        assert score == 10
        assert [op.kind for op in trace] == [OpKind.MATCH] * 5
        assert [(op.ref_index, op.hyp_index) for op in trace] == [
            (i, i) for i in range(5)
        ]

    def test_empty_input(self):
        words = tokens_of(["a"])
        assert alignment.smith_waterman([], words, PARAMS) == ([], 0.0)
        assert alignment.smith_waterman(words, [], PARAMS) == ([], 0.0)

    def test_no_common_token(self):
        trace, score = alignment.smith_waterman(
            tokens_of(["a", "b"]), tokens_of(["c", "d"]), PARAMS
        )
        assert trace == []
        assert score == 0

    def test_tie_prefers_lowest_indices(self):
        trace, score = alignment.smith_waterman(
            tokens_of(["a"]), tokens_of(["a", "a"]), PARAMS
        )
        assert score == 2
        assert trace == [EditOp(OpKind.MATCH, 0, 0)]

    def test_surrounding_noise_does_not_change_score(self):
        core = ["a", "b", "c"]
        _, clean = alignment.smith_waterman(tokens_of(core), tokens_of(core), PARAMS)
        _, noisy = alignment.smith_waterman(
            tokens_of(["x", "y"] + core), tokens_of(["p"] + core + ["q"]), PARAMS
        )
        assert clean == noisy == 6

    def test_exhaustive_small_inputs(self):
        sequences = [
            list(s)
            for length in range(1, 4)
            for s in itertools.product("abc", repeat=length)
        ]
        for ref, hyp in itertools.product(sequences, repeat=2):
            trace, score = alignment.smith_waterman(
                tokens_of(ref), tokens_of(hyp), PARAMS
            )
            assert score == local_score_oracle(ref, hyp), (ref, hyp)
            if trace:
                assert alignment.trace_score(trace, PARAMS) == score
                assert_valid_local_trace(trace)

    def test_exhaustive_up_to_six_tokens(self):
        """Every pair of sequences of up to six tokens over three symbols.
        Tokens are only compared for equality, so one reference per relabeling
        of the symbols stands for all of them."""
        words = [
            "".join(s)
            for length in range(7)
            for s in itertools.product("abc", repeat=length)
        ]
        for ref in filter(first_use_ordered, words):
            oracle = local_scores_against(ref)
            ref_tokens = tokens_of(list(ref))
            for hyp in words:
                trace, score = alignment.smith_waterman(
                    ref_tokens, tokens_of(list(hyp)), PARAMS
                )
                assert score == oracle(hyp), (ref, hyp)
                if trace:
                    assert alignment.trace_score(trace, PARAMS) == score
                    assert_valid_local_trace(trace)

    def test_random_inputs(self):
        rng = random.Random(7)
        for _ in range(500):
            ref = [rng.choice("abc") for _ in range(rng.randint(1, 6))]
            hyp = [rng.choice("abc") for _ in range(rng.randint(1, 6))]
            trace, score = alignment.smith_waterman(
                tokens_of(ref), tokens_of(hyp), PARAMS
            )
            assert score == local_score_oracle(ref, hyp), (ref, hyp)
            if trace:
                assert alignment.trace_score(trace, PARAMS) == score


class TestCompleteTrace(TestCase):
    def complete(self, ref_words, hyp_words):
        ref, hyp = tokens_of(ref_words), tokens_of(hyp_words)
        local, _ = alignment.smith_waterman(ref, hyp, PARAMS)
        return alignment.complete_trace(ref, hyp, local, PARAMS)

    def test_two_substitutions(self):
        trace = self.complete(
            "keep her on the coumadin daily".split(),
            "keep her on the cool madden".split(),
        )
        assert [op.kind for op in trace] == [OpKind.MATCH] * 4 + [
            OpKind.SUBSTITUTE
        ] * 2
        assert alignment.trace_score(trace, PARAMS) == 6

    def test_split_word_substitutes_then_inserts(self):
        trace = self.complete(
            "keep her on the symbicort".split(),
            "keep her on the civil court".split(),
        )
        assert trace == [
            EditOp(OpKind.MATCH, 0, 0),
            EditOp(OpKind.MATCH, 1, 1),
            EditOp(OpKind.MATCH, 2, 2),
            EditOp(OpKind.MATCH, 3, 3),
            EditOp(OpKind.SUBSTITUTE, 4, 4),
            EditOp(OpKind.INSERT, hyp_index=5),
        ]
        assert alignment.trace_score(trace, PARAMS) == 6

    def test_covers_both_streams(self):
        rng = random.Random(3)
        for _ in range(200):
            ref = [rng.choice("abcd") for _ in range(rng.randint(1, 7))]
            hyp = [rng.choice("abcd") for _ in range(rng.randint(1, 7))]
            trace = self.complete(ref, hyp)
            ref_indices = [op.ref_index for op in trace if op.ref_index is not None]
            hyp_indices = [op.hyp_index for op in trace if op.hyp_index is not None]
            assert ref_indices == list(range(len(ref)))
            assert hyp_indices == list(range(len(hyp)))

    def test_empty_hypothesis_is_all_deletes(self):
        trace = alignment.complete_trace(tokens_of(["a", "b"]), [], [], PARAMS)
        assert trace == [
            EditOp(OpKind.DELETE, ref_index=0),
            EditOp(OpKind.DELETE, ref_index=1),
        ]


class TestAlignTranscripts(TestCase):
    def test_single_segment_identity(self):
        _, _, pairs = align_texts(
            ["Keep her on the Symbicort."], ["keep her on the symbicort"]
        )
        assert len(pairs) == 1
        assert not pairs[0].has_error
        assert pairs[0].score == 10
        assert pairs[0].hyp_segment.norms == pairs[0].ref_segment.norms

    def test_error_stays_in_its_segment(self):
        _, _, pairs = align_texts(
            ["Keep her on the symbicort. How is the pain?"],
            ["keep her on the civil court how is the pain"],
        )
        first, second = pairs
        assert first.hyp_segment.norms == ["keep", "her", "on", "the", "civil", "court"]
        assert first.has_error
        assert first.score == 6
        assert second.hyp_segment.norms == ["how", "is", "the", "pain"]
        assert not second.has_error
        assert second.score == 8

    def test_missing_second_segment(self):
        _, _, pairs = align_texts(
            ["Take it daily. Call me tomorrow."], ["take it daily"]
        )
        first, second = pairs
        assert not first.has_error
        assert second.hyp_segment.tokens == []
        assert second.hyp_segment.start_s == second.hyp_segment.end_s
        assert [op.kind for op in second.trace] == [OpKind.DELETE] * 3
        assert second.score == -3

    def test_leading_insert_joins_first_segment(self):
        _, _, pairs = align_texts(
            ["Keep her on the inhaler."], ["um keep her on the inhaler"]
        )
        (pair,) = pairs
        assert pair.trace[0] == EditOp(OpKind.INSERT, hyp_index=0)
        assert pair.hyp_segment.norms[0] == "um"

    def test_empty_hypothesis(self):
        ref = stream_of("Good morning. How are you?")
        pairs = alignment.align_transcripts(ref.tokens, [], ref.segments, [], PARAMS)
        assert len(pairs) == 2
        for pair in pairs:
            assert pair.hyp_segment.tokens == []
            assert all(op.kind == OpKind.DELETE for op in pair.trace)

    def test_empty_reference(self):
        ref = stream_of("...")
        hyp = stream_of("uh huh")
        with self.assertLogs("asr_ward.alignment", level="WARNING"):
            pairs = alignment.align_transcripts(
                ref.tokens, hyp.tokens, ref.segments, hyp.segments, PARAMS
            )
        assert pairs == []

        empty = stream_of()
        assert (
            alignment.align_transcripts([], [], empty.segments, [], PARAMS) == []
        )

    def test_hypothesis_spans_partition_stream(self):
        _, hyp, pairs = align_texts(
            ["Good morning. Any chest pain? Keep taking the coumadin."],
            ["good morning any chest pains keep making the cool madden"],
        )
        assert len(pairs) == 3
        assert [t for p in pairs for t in p.hyp_segment.tokens] == hyp.tokens
        trace = [op for p in pairs for op in p.trace]
        ref_indices = [op.ref_index for op in trace if op.ref_index is not None]
        assert ref_indices == sorted(ref_indices)

    def test_segments_must_partition_tokens(self):
        ref = stream_of("One two. Three four.")
        hyp = stream_of("one two three four")
        with pytest.raises(SegmentationMismatch):
            alignment.align_transcripts(
                ref.tokens, hyp.tokens, ref.segments[:1], hyp.segments, PARAMS
            )
        with pytest.raises(SegmentationMismatch):
            alignment.align_transcripts(
                ref.tokens, hyp.tokens[1:], ref.segments, hyp.segments, PARAMS
            )


class TestPairRecords(TestCase):
    def test_record_rebases_indices(self):
        _, _, pairs = align_texts(
            ["Keep her on the symbicort. How is the pain?"],
            ["keep her on the civil court how is the pain"],
        )
        second = pairs[1]
        record = alignment.pair_to_record(second, "c1", 1, "c1.wav", 5, 6)
        assert record["trace"][0] == ["Match", 0, 0]
        assert record["hyp_text"] == "how is the pain"
        assert record["segment_index"] == 1

        restored = alignment.pair_from_record(record)
        assert restored.ref_segment.norms == second.ref_segment.norms
        assert restored.hyp_segment.norms == second.hyp_segment.norms
        assert restored.trace == [
            EditOp(op.kind, op.ref_index - 5, op.hyp_index - 6) for op in second.trace
        ]
        assert restored.score == second.score

    def test_empty_hypothesis_record(self):
        _, _, pairs = align_texts(
            ["Take it daily. Call me tomorrow."], ["take it daily"]
        )
        record = alignment.pair_to_record(pairs[1], "c1", 1, "c1.wav", 3, 3)
        assert record["hyp_text"] == ""
        assert record["hyp_start_s"] is None
        assert record["trace"] == [
            ["Delete", 0, None],
            ["Delete", 1, None],
            ["Delete", 2, None],
        ]
        restored = alignment.pair_from_record(record)
        assert restored.hyp_segment.tokens == []
        assert restored.has_error
