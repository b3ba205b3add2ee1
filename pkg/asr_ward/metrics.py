"""Transcript quality and error detection metrics, and breakdown reports"""

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
import json
import logging
import math
import os

import numpy
import pandas
from jinja2 import Environment, FileSystemLoader

from asr_ward import ontology
from asr_ward.errors import (
    EmptyConfusion,
    EmptyInput,
    EmptyReference,
    MissingPrediction,
    SchemaError,
)
from asr_ward.models import DatasetManifest
from asr_ward.textnorm import Token, normalize

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


TEMPLATE_DIR_PATH = os.path.join(os.path.dirname(__file__), "templates")
BLEU_MAX_ORDER = 4


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError(f"Negative confusion counts {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> Fraction:
        if not self.total:
            raise EmptyConfusion("Confusion matrix is empty")
        return Fraction(self.tp + self.tn, self.total)

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn + other.fn,
        )


### Transcript metrics
def edit_distance(ref: list[str], hyp: list[str]) -> int:
    """Unit-cost Levenshtein distance between word lists"""
    previous = list(range(len(hyp) + 1))
    for i, ref_word in enumerate(ref, start=1):
        current = [i] + [0] * len(hyp)
        for j, hyp_word in enumerate(hyp, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ref_word != hyp_word),
            )
        previous = current
    return previous[-1]


def wer(ref: list[Token], hyp: list[Token]) -> float:
    """(S + D + I) / N as a percentage"""
    if not ref:
        raise EmptyReference("WER needs a non-empty reference")
    distance = edit_distance([t.norm for t in ref], [t.norm for t in hyp])
    return 100 * distance / len(ref)


def _ngrams(words: list[str], n: int) -> Counter:
    return Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))


def _bleu_stats(ref: list[str], hyp: list[str]) -> list[int]:
    """[hyp_len, ref_len, matches_1, total_1, ..., matches_4, total_4]"""
    stats = [len(hyp), len(ref)]
    for n in range(1, BLEU_MAX_ORDER + 1):
        hyp_ngrams = _ngrams(hyp, n)
        clipped = hyp_ngrams & _ngrams(ref, n)
        stats.extend([sum(clipped.values()), max(len(hyp) - n + 1, 0)])
    return stats


def _bleu_from_stats(stats: list[int]) -> float:
    hyp_len, ref_len = stats[0], stats[1]
    log_precision = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        matches, total = stats[2 * n], stats[2 * n + 1]
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            # Add-one smoothing for higher orders
            precision = (matches + 1) / (total + 1)
        log_precision += math.log(precision) / BLEU_MAX_ORDER

    brevity = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return 100 * brevity * math.exp(log_precision)


def bleu(ref: list[Token], hyp: list[Token]) -> float:
    """BLEU-4 with uniform weights and brevity penalty, in [0, 100]"""
    if not ref or not hyp:
        raise EmptyInput("BLEU needs non-empty reference and hypothesis")
    return _bleu_from_stats(_bleu_stats([t.norm for t in ref], [t.norm for t in hyp]))


def corpus_bleu(pairs: list[tuple[list[Token], list[Token]]]) -> float:
    """BLEU over clipped counts and lengths summed across all pairs"""
    totals = [0] * (2 + 2 * BLEU_MAX_ORDER)
    for ref, hyp in pairs:
        stats = _bleu_stats([t.norm for t in ref], [t.norm for t in hyp])
        totals = [a + b for a, b in zip(totals, stats)]
    if not totals[0] or not totals[1]:
        raise EmptyInput("BLEU needs non-empty reference and hypothesis text")
    return _bleu_from_stats(totals)


def f1_score(precision, recall):
    if precision + recall == 0:
        return 0 * precision
    return 2 * precision * recall / (precision + recall)


def _medical_counts(ref_hits, hyp_tokens, lex) -> tuple[int, int, int, int]:
    """(recovered, ref term count, recovered also found in hyp, hyp term count)"""
    hyp_norms = [t.norm for t in hyp_tokens]
    recovered = [
        hit.term for hit in ref_hits if ontology.contains_term(hyp_norms, hit.term)
    ]
    hyp_terms = [hit.term for hit in ontology.find_terms(hyp_tokens, lex)]
    overlap = sum((Counter(recovered) & Counter(hyp_terms)).values())
    return len(recovered), len(ref_hits), overlap, len(hyp_terms)


def _medical_prf_from_counts(recovered, ref_count, overlap, hyp_count):
    if hyp_count:
        precision = overlap / hyp_count
    else:
        precision = 1.0 if not recovered else 0.0
    recall = recovered / ref_count if ref_count else 1.0
    return precision, recall, f1_score(precision, recall)


def medical_prf(
    ref_hits: list[ontology.TermHit],
    hyp_tokens: list[Token],
    lex: ontology.Lexicon,
) -> tuple[float, float, float]:
    """How well reference medical terms survive in the hypothesis.

    Recall is the share of reference terms found verbatim in the hypothesis;
    precision is the share of hypothesis terms that are such recovered terms.
    """
    return _medical_prf_from_counts(*_medical_counts(ref_hits, hyp_tokens, lex))


def score_transcripts(pairs, lex: ontology.Lexicon) -> dict:
    """Corpus WER, BLEU and medical term P/R/F1 over aligned pairs"""
    ref_words = 0
    edits = 0
    bleu_pairs = []
    medical = [0, 0, 0, 0]
    for pair in pairs:
        ref_tokens, hyp_tokens = pair.ref_segment.tokens, pair.hyp_segment.tokens
        ref_words += len(ref_tokens)
        edits += edit_distance(
            [t.norm for t in ref_tokens], [t.norm for t in hyp_tokens]
        )
        bleu_pairs.append((ref_tokens, hyp_tokens))
        counts = _medical_counts(
            ontology.find_terms(ref_tokens, lex), hyp_tokens, lex
        )
        medical = [a + b for a, b in zip(medical, counts)]

    if not ref_words:
        raise EmptyReference("No reference words to score against")
    precision, recall, f1 = _medical_prf_from_counts(*medical)
    return {
        "pairs": len(bleu_pairs),
        "ref_words": ref_words,
        "wer": 100 * edits / ref_words,
        "bleu": corpus_bleu(bleu_pairs),
        "medical_terms": medical[1],
        "medical_precision": precision,
        "medical_recall": recall,
        "medical_f1": f1,
    }


### Error detection metrics
def classification_metrics(
    c: Confusion,
) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """(precision, recall, F1, CER %) with the error class as positive"""
    if not c.total:
        raise EmptyConfusion("Confusion matrix is empty")
    precision = Fraction(c.tp, c.tp + c.fp) if c.tp + c.fp else Fraction(0)
    recall = Fraction(c.tp, c.tp + c.fn) if c.tp + c.fn else Fraction(0)
    cer = Fraction(c.fp + c.fn, c.total) * 100
    return precision, recall, f1_score(precision, recall), cer


def majority_cer(c: Confusion) -> Fraction:
    """CER of always predicting the more common true class"""
    positives = c.tp + c.fn
    negatives = c.tn + c.fp
    return Fraction(min(positives, negatives), c.total) * 100


def metrics_row(c: Confusion) -> dict:
    precision, recall, f1, cer = classification_metrics(c)
    return {
        "precision": float(precision),
        "recall": float(recall),
        "f1": float(f1),
        "cer": float(cer),
        "support": c.total,
        "tp": c.tp,
        "fp": c.fp,
        "tn": c.tn,
        "fn": c.fn,
    }


@dataclass
class ErrorReport:
    overall: dict = field(default_factory=dict)
    by_group: dict[str, dict] = field(default_factory=dict)
    by_term: dict[str, dict] = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "by_group": self.by_group,
            "by_term": self.by_term,
            "counts": self.counts,
        }


def _confusion_of(frame: pandas.DataFrame) -> Confusion:
    actual = frame["actual"] == 1
    predicted = frame["predicted"] == 1
    return Confusion(
        tp=int((actual & predicted).sum()),
        fp=int((~actual & predicted).sum()),
        tn=int((~actual & ~predicted).sum()),
        fn=int((actual & ~predicted).sum()),
    )


def _prediction_map(preds) -> dict[str, int]:
    if isinstance(preds, dict):
        return {k: int(v) for k, v in preds.items()}
    return {p.id: int(p.label) for p in preds}


def breakdown(
    preds,
    manifest: DatasetManifest,
    lex: ontology.Lexicon | None = None,
    target: str = "label",
) -> ErrorReport:
    """Overall, per semantic group and per term detection metrics.

    An example counts toward every group and term found in its reference
    segment. With a lexicon, terms are found afresh in the reference text,
    otherwise the manifest's term hits are used.
    """
    predicted = _prediction_map(preds)
    rows = []
    for example in manifest.examples:
        if example.id not in predicted:
            raise MissingPrediction(example.id)
        actual = getattr(example, target)
        if actual is None:
            raise SchemaError(f"Example {example.id} has no {target}")
        if lex is not None:
            hits = [
                (hit.term, hit.group.value)
                for hit in ontology.find_terms(normalize(example.ref_text), lex)
            ]
        else:
            hits = [(hit.term, hit.group) for hit in example.term_hits]
        rows.append(
            {
                "id": example.id,
                "actual": int(actual),
                "predicted": predicted[example.id],
                "hits": hits,
            }
        )

    if not rows:
        return ErrorReport()

    frame = pandas.DataFrame(rows)
    overall = _confusion_of(frame)
    hits = frame.explode("hits").dropna(subset=["hits"])
    hits["term"] = hits["hits"].map(lambda hit: hit[0])
    hits["group"] = hits["hits"].map(lambda hit: hit[1])

    by_group = {}
    reported = {group.value for group in ontology.REPORTED_GROUPS}
    for group, subset in hits.groupby("group", sort=True):
        if group in reported:
            by_group[group] = metrics_row(
                _confusion_of(subset.drop_duplicates(subset="id"))
            )

    by_term = {}
    for term, subset in hits.groupby("term", sort=True):
        by_term[term] = metrics_row(_confusion_of(subset.drop_duplicates(subset="id")))

    counts = {
        "examples": overall.total,
        "positives": overall.tp + overall.fn,
        "negatives": overall.tn + overall.fp,
        "predicted_positives": overall.tp + overall.fp,
        "with_terms": int(hits["id"].nunique()),
        "majority_cer": float(majority_cer(overall)),
    }
    return ErrorReport(metrics_row(overall), by_group, by_term, counts)


def frequent_terms(report: ErrorReport, k: int) -> list[str]:
    """The k terms with most supporting examples"""
    ranked = sorted(report.by_term, key=lambda t: (-report.by_term[t]["support"], t))
    return ranked[:k]


def infrequent_terms(
    report: ErrorReport, k: int, cutoff: int, seed: int = 0
) -> list[str]:
    """A seeded sample of k terms outside the top k that still have at least
    `cutoff` supporting examples, least supported first."""
    top = set(frequent_terms(report, k))
    pool = sorted(
        t
        for t, row in report.by_term.items()
        if row["support"] >= cutoff and t not in top
    )
    if len(pool) > k:
        rng = numpy.random.default_rng(seed)
        pool = [pool[i] for i in sorted(rng.choice(len(pool), size=k, replace=False))]
    return sorted(pool, key=lambda t: (report.by_term[t]["support"], t))


def render_report(
    report: ErrorReport,
    format: str = "text",
    top_k: int = 5,
    cutoff: int = 10,
    seed: int = 0,
) -> bytes:
    if format == "json":
        return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode(
            "utf-8"
        )
    if format != "text":
        raise ValueError(f"Unknown report format {format}")

    environment = Environment(
        loader=FileSystemLoader(TEMPLATE_DIR_PATH),
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    template = environment.get_template("report.txt.j2")
    content = template.render(
        overall=report.overall,
        by_group=report.by_group,
        by_term=report.by_term,
        counts=report.counts,
        frequent=frequent_terms(report, top_k),
        infrequent=infrequent_terms(report, top_k, cutoff, seed),
    )
    return content.encode("utf-8")
