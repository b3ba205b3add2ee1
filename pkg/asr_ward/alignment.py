"""Word-level alignment of reference and hypothesis transcripts.

Reference timestamps are often off by a few seconds, so segments cannot be
paired by time. Instead one Smith-Waterman pass runs over the whole
conversation and the resulting trace is cut at reference segment boundaries.
"""

from dataclasses import dataclass
from enum import Enum
import logging

from asr_ward.errors import SegmentationMismatch
from asr_ward.models import AlignParams
from asr_ward.textnorm import Segment, Token, normalize

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


class OpKind(str, Enum):
    MATCH = "Match"
    SUBSTITUTE = "Substitute"
    INSERT = "Insert"
    DELETE = "Delete"


@dataclass(frozen=True)
class EditOp:
    kind: OpKind
    ref_index: int | None = None
    hyp_index: int | None = None

    def __post_init__(self):
        if self.kind in (OpKind.MATCH, OpKind.SUBSTITUTE):
            if self.ref_index is None or self.hyp_index is None:
                raise ValueError(f"{self.kind.value} needs both indices")
        elif self.kind == OpKind.INSERT:
            if self.ref_index is not None or self.hyp_index is None:
                raise ValueError("Insert has only a hypothesis index")
        elif self.hyp_index is not None or self.ref_index is None:
            raise ValueError("Delete has only a reference index")


@dataclass
class AlignedPair:
    ref_segment: Segment
    hyp_segment: Segment
    trace: list[EditOp]
    score: float

    @property
    def has_error(self) -> bool:
        return any(op.kind != OpKind.MATCH for op in self.trace)


# Traceback pointers
_STOP, _DIAG, _UP, _LEFT = 0, 1, 2, 3


def op_score(op: EditOp, params: AlignParams) -> float:
    if op.kind == OpKind.MATCH:
        return params.match_score
    if op.kind == OpKind.SUBSTITUTE:
        return params.mismatch_penalty
    return params.gap_penalty


def trace_score(trace: list[EditOp], params: AlignParams) -> float:
    return sum(op_score(op, params) for op in trace)


def _diagonal_op(ref: list[Token], hyp: list[Token], i: int, j: int) -> EditOp:
    kind = OpKind.MATCH if ref[i].norm == hyp[j].norm else OpKind.SUBSTITUTE
    return EditOp(kind, i, j)


def _fill_local(ref, hyp, params):
    n, m = len(ref), len(hyp)
    score = [[0.0] * (m + 1) for _ in range(n + 1)]
    pointer = [[_STOP] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        ref_norm = ref[i - 1].norm
        row, prev_row = score[i], score[i - 1]
        pointer_row = pointer[i]
        for j in range(1, m + 1):
            if ref_norm == hyp[j - 1].norm:
                diagonal = prev_row[j - 1] + params.match_score
            else:
                diagonal = prev_row[j - 1] + params.mismatch_penalty
            up = prev_row[j] + params.gap_penalty
            left = row[j - 1] + params.gap_penalty

            # Ties go diagonal > up > left
            best, direction = diagonal, _DIAG
            if up > best:
                best, direction = up, _UP
            if left > best:
                best, direction = left, _LEFT
            if best <= 0:
                best, direction = 0.0, _STOP
            row[j] = best
            pointer_row[j] = direction
    return score, pointer


def _traceback(ref, hyp, score, pointer, i, j) -> list[EditOp]:
    trace = []
    while score[i][j] > 0 and pointer[i][j] != _STOP:
        direction = pointer[i][j]
        if direction == _DIAG:
            trace.append(_diagonal_op(ref, hyp, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif direction == _UP:
            trace.append(EditOp(OpKind.DELETE, ref_index=i - 1))
            i -= 1
        else:
            trace.append(EditOp(OpKind.INSERT, hyp_index=j - 1))
            j -= 1
    trace.reverse()
    return trace


def _ref_coverage(trace: list[EditOp]) -> int:
    return sum(1 for op in trace if op.ref_index is not None)


def smith_waterman(
    ref: list[Token], hyp: list[Token], params: AlignParams
) -> tuple[list[EditOp], float]:
    """Best local alignment of two token lists, compared on their norms.

    Among end cells sharing the best score, the one whose alignment covers the
    most reference tokens wins, then the lowest reference index, then the
    lowest hypothesis index.
    """
    if not ref or not hyp:
        return [], 0.0

    score, pointer = _fill_local(ref, hyp, params)
    best = max(max(row) for row in score)
    if best <= 0:
        return [], 0.0

    best_trace = None
    for i in range(1, len(ref) + 1):
        for j in range(1, len(hyp) + 1):
            if score[i][j] != best:
                continue
            trace = _traceback(ref, hyp, score, pointer, i, j)
            if best_trace is None or _ref_coverage(trace) > _ref_coverage(best_trace):
                best_trace = trace
    return best_trace, best


def _global_steps(ref_norms: list[str], hyp_norms: list[str], params: AlignParams):
    """Needleman-Wunsch traceback as (direction, ref position, hyp position),
    last step first."""
    n, m = len(ref_norms), len(hyp_norms)
    score = [[0.0] * (m + 1) for _ in range(n + 1)]
    pointer = [[_STOP] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        score[i][0] = i * params.gap_penalty
        pointer[i][0] = _UP
    for j in range(1, m + 1):
        score[0][j] = j * params.gap_penalty
        pointer[0][j] = _LEFT
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if ref_norms[i - 1] == hyp_norms[j - 1]:
                diagonal = score[i - 1][j - 1] + params.match_score
            else:
                diagonal = score[i - 1][j - 1] + params.mismatch_penalty
            up = score[i - 1][j] + params.gap_penalty
            left = score[i][j - 1] + params.gap_penalty
            best, direction = diagonal, _DIAG
            if up > best:
                best, direction = up, _UP
            if left > best:
                best, direction = left, _LEFT
            score[i][j] = best
            pointer[i][j] = direction

    steps = []
    i, j = n, m
    while i > 0 or j > 0:
        direction = pointer[i][j]
        steps.append((direction, i - 1, j - 1))
        if direction == _DIAG:
            i, j = i - 1, j - 1
        elif direction == _UP:
            i -= 1
        else:
            j -= 1
    return steps


def needleman_wunsch(
    ref: list[Token],
    hyp: list[Token],
    params: AlignParams,
    ref_offset: int = 0,
    hyp_offset: int = 0,
    anchor_start: bool = False,
) -> list[EditOp]:
    """Global alignment with the same scores and tie-break, used to complete
    the unaligned flanks around a local alignment.

    Ties favour diagonal ops at the end of the alignment, or at its start with
    `anchor_start`, so gaps land away from the neighbouring local alignment.
    """
    ref_norms = [t.norm for t in ref]
    hyp_norms = [t.norm for t in hyp]
    if anchor_start:
        steps = _global_steps(ref_norms[::-1], hyp_norms[::-1], params)
        steps = [(d, len(ref) - 1 - i, len(hyp) - 1 - j) for d, i, j in steps]
    else:
        steps = _global_steps(ref_norms, hyp_norms, params)
        steps.reverse()

    trace = []
    for direction, i, j in steps:
        if direction == _DIAG:
            matched = ref_norms[i] == hyp_norms[j]
            kind = OpKind.MATCH if matched else OpKind.SUBSTITUTE
            trace.append(EditOp(kind, ref_offset + i, hyp_offset + j))
        elif direction == _UP:
            trace.append(EditOp(OpKind.DELETE, ref_index=ref_offset + i))
        else:
            trace.append(EditOp(OpKind.INSERT, hyp_index=hyp_offset + j))
    return trace


def complete_trace(
    ref: list[Token], hyp: list[Token], local_trace: list[EditOp], params: AlignParams
) -> list[EditOp]:
    """Extend a local trace so that it covers every token of both streams"""
    if not local_trace:
        return needleman_wunsch(ref, hyp, params)

    first_ref = next(op.ref_index for op in local_trace if op.ref_index is not None)
    first_hyp = next(op.hyp_index for op in local_trace if op.hyp_index is not None)
    last_ref = next(
        op.ref_index for op in reversed(local_trace) if op.ref_index is not None
    )
    last_hyp = next(
        op.hyp_index for op in reversed(local_trace) if op.hyp_index is not None
    )

    prefix = needleman_wunsch(ref[:first_ref], hyp[:first_hyp], params)
    suffix = needleman_wunsch(
        ref[last_ref + 1 :],
        hyp[last_hyp + 1 :],
        params,
        ref_offset=last_ref + 1,
        hyp_offset=last_hyp + 1,
        anchor_start=True,
    )
    return prefix + local_trace + suffix


def _validate_partition(tokens: list[Token], segments: list[Segment], side: str):
    flattened = [token for segment in segments for token in segment.tokens]
    if flattened != tokens:
        raise SegmentationMismatch(
            f"{side} segments do not partition the {side} token stream"
        )


def _token_times(segments: list[Segment]) -> list[tuple[float, float, str]]:
    times = []
    for segment in segments:
        count = len(segment.tokens)
        duration = segment.end_s - segment.start_s
        for k in range(count):
            times.append(
                (
                    segment.start_s + duration * k / count,
                    segment.start_s + duration * (k + 1) / count,
                    segment.speaker,
                )
            )
    return times


def _cut_trace(
    trace: list[EditOp], ref_segments: list[Segment]
) -> list[list[EditOp]]:
    """Group trace ops by reference segment. Insert ops join the segment of the
    closest preceding reference-consuming op, or the first segment."""
    segment_of_ref = []
    for segment_index, segment in enumerate(ref_segments):
        segment_of_ref.extend([segment_index] * len(segment.tokens))

    slices = [[] for _ in ref_segments]
    current = 0
    for op in trace:
        if op.ref_index is not None:
            current = segment_of_ref[op.ref_index]
        slices[current].append(op)
    return slices


def align_transcripts(
    ref_tokens: list[Token],
    hyp_tokens: list[Token],
    ref_segments: list[Segment],
    hyp_segments: list[Segment],
    params: AlignParams,
) -> list[AlignedPair]:
    """Align whole conversations, then pair every reference segment with the
    hypothesis span covered by its slice of the trace.

    Edit op indices are positions in `ref_tokens` / `hyp_tokens`.
    """
    _validate_partition(ref_tokens, ref_segments, "reference")
    _validate_partition(hyp_tokens, hyp_segments, "hypothesis")
    if not ref_segments:
        if hyp_tokens:
            logger.warning(
                f"Reference has no tokens, {len(hyp_tokens)} hypothesis tokens "
                "left unpaired"
            )
        return []

    local_trace, local_score = smith_waterman(ref_tokens, hyp_tokens, params)
    logger.debug(f"Local alignment score {local_score} over {len(local_trace)} ops")
    trace = complete_trace(ref_tokens, hyp_tokens, local_trace, params)
    hyp_times = _token_times(hyp_segments)

    pairs = []
    for ref_segment, trace_slice in zip(ref_segments, _cut_trace(trace, ref_segments)):
        hyp_indices = [op.hyp_index for op in trace_slice if op.hyp_index is not None]
        if hyp_indices:
            first, last = hyp_indices[0], hyp_indices[-1]
            hyp_segment = Segment(
                tokens=hyp_tokens[first : last + 1],
                start_s=hyp_times[first][0],
                end_s=hyp_times[last][1],
                speaker=hyp_times[first][2],
            )
        else:
            hyp_segment = Segment(
                tokens=[],
                start_s=ref_segment.start_s,
                end_s=ref_segment.start_s,
                speaker=ref_segment.speaker,
            )
        pairs.append(
            AlignedPair(
                ref_segment=ref_segment,
                hyp_segment=hyp_segment,
                trace=trace_slice,
                score=trace_score(trace_slice, params),
            )
        )
    return pairs


### Aligned pair records (one JSON object per line in aligned-pairs files)
def pair_to_record(
    pair: AlignedPair,
    conversation_id: str,
    segment_index: int,
    audio_path: str,
    ref_offset: int,
    hyp_offset: int,
) -> dict:
    """Serialize a pair. Trace indices are rebased to positions within the
    pair's own ref/hyp token lists, `*_offset` being the stream position of
    each segment's first token."""
    trace = []
    for op in pair.trace:
        trace.append(
            [
                op.kind.value,
                None if op.ref_index is None else op.ref_index - ref_offset,
                None if op.hyp_index is None else op.hyp_index - hyp_offset,
            ]
        )
    has_hyp = bool(pair.hyp_segment.tokens)
    return {
        "conversation_id": conversation_id,
        "segment_index": segment_index,
        "audio_path": audio_path,
        "speaker": pair.ref_segment.speaker,
        "ref_text": pair.ref_segment.text,
        "hyp_text": pair.hyp_segment.text,
        "ref_start_s": pair.ref_segment.start_s,
        "ref_end_s": pair.ref_segment.end_s,
        "hyp_start_s": pair.hyp_segment.start_s if has_hyp else None,
        "hyp_end_s": pair.hyp_segment.end_s if has_hyp else None,
        "score": pair.score,
        "trace": trace,
    }


def pair_from_record(record: dict) -> AlignedPair:
    ref_segment = Segment(
        tokens=normalize(record["ref_text"]),
        start_s=record["ref_start_s"],
        end_s=record["ref_end_s"],
        speaker=record.get("speaker", ""),
    )
    hyp_tokens = normalize(record["hyp_text"])
    if hyp_tokens:
        hyp_segment = Segment(
            tokens=hyp_tokens,
            start_s=record["hyp_start_s"],
            end_s=record["hyp_end_s"],
            speaker=record.get("speaker", ""),
        )
    else:
        hyp_segment = Segment(
            tokens=[], start_s=record["ref_start_s"], end_s=record["ref_start_s"]
        )
    trace = [
        EditOp(OpKind(kind), ref_index, hyp_index)
        for kind, ref_index, hyp_index in record["trace"]
    ]
    return AlignedPair(ref_segment, hyp_segment, trace, record["score"])
