from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging

import pandas

from asr_ward import alignment, ontology, util
from asr_ward.loader import loader
from asr_ward.manifests import manifest
from asr_ward.processors import processor

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


RECORD_COLUMNS = [
    manifest.CONVERSATION_FIELD,
    manifest.SEGMENT_INDEX_FIELD,
    manifest.AUDIO_PATH_FIELD,
    manifest.REF_TEXT_FIELD,
    manifest.HYP_TEXT_FIELD,
    manifest.REF_START_FIELD,
    manifest.REF_END_FIELD,
    manifest.HYP_START_FIELD,
    manifest.HYP_END_FIELD,
    manifest.SCORE_FIELD,
    manifest.TRACE_FIELD,
]


def label_pair(pair: alignment.AlignedPair, lex: ontology.Lexicon) -> tuple[int, int]:
    """(label, medical_label). A medical error is a reference term that does
    not occur verbatim (after normalization) in the hypothesis."""
    label = int(pair.has_error)
    hyp_norms = pair.hyp_segment.norms
    medical_label = int(
        any(
            not ontology.contains_term(hyp_norms, hit.term)
            for hit in ontology.find_terms(pair.ref_segment.tokens, lex)
        )
    )
    return label, medical_label


def _audio_window(record: dict) -> tuple[float, float]:
    """The hypothesis span when there is one, otherwise the reference segment"""
    if record[manifest.HYP_TEXT_FIELD].strip() and not pandas.isna(
        record[manifest.HYP_START_FIELD]
    ):
        return record[manifest.HYP_START_FIELD], record[manifest.HYP_END_FIELD]
    return record[manifest.REF_START_FIELD], record[manifest.REF_END_FIELD]


@dataclass
class LabelProcessor(processor.Processor):
    """Turns aligned pair records into labelled examples"""

    lexicon: ontology.Lexicon = field(default_factory=loader.get_lexicon)
    workers: int = field(default_factory=util.get_worker_count)

    required_columns = RECORD_COLUMNS

    def _label_record(self, record: dict) -> dict:
        pair = alignment.pair_from_record(record)
        label, medical_label = label_pair(pair, self.lexicon)
        start_s, end_s = _audio_window(record)
        hits = ontology.find_terms(pair.ref_segment.tokens, self.lexicon)
        return {
            manifest.ID_FIELD: util.make_example_id(
                record[manifest.CONVERSATION_FIELD],
                int(record[manifest.SEGMENT_INDEX_FIELD]),
            ),
            manifest.AUDIO_PATH_FIELD: record[manifest.AUDIO_PATH_FIELD],
            manifest.START_FIELD: float(start_s),
            manifest.END_FIELD: float(end_s),
            manifest.HYP_TEXT_FIELD: record[manifest.HYP_TEXT_FIELD],
            manifest.LABEL_FIELD: label,
            manifest.MEDICAL_LABEL_FIELD: medical_label,
            manifest.REF_TEXT_FIELD: record[manifest.REF_TEXT_FIELD],
            manifest.TERM_HITS_FIELD: [
                {
                    "term": hit.term,
                    "group": hit.group.value,
                    "start": hit.start,
                    "len": hit.len,
                }
                for hit in hits
            ],
            manifest.HYP_CONFIDENCE_FIELD: manifest.confidence_list(
                record.get(manifest.HYP_CONFIDENCE_FIELD)
            ),
        }

    def _label_conversation(self, records: list[dict]) -> list[dict]:
        return [self._label_record(record) for record in records]

    def _process(self):
        if self.data.empty:
            self.data = pandas.DataFrame(columns=manifest.EXAMPLE_COLUMNS)
            return

        by_conversation = {}
        for record in self.data.to_dict("records"):
            by_conversation.setdefault(record[manifest.CONVERSATION_FIELD], []).append(
                record
            )
        conversation_ids = sorted(by_conversation)

        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            labelled = executor.map(
                self._label_conversation,
                [by_conversation[cid] for cid in conversation_ids],
            )
            rows = [row for conversation_rows in labelled for row in conversation_rows]

        self.data = (
            pandas.DataFrame(rows, columns=manifest.EXAMPLE_COLUMNS)
            .sort_values(manifest.ID_FIELD, kind="stable")
            .reset_index(drop=True)
        )
        logger.info(
            f"Labelled {len(self.data)} examples, "
            f"{int(self.data[manifest.LABEL_FIELD].sum())} with errors, "
            f"{int(self.data[manifest.MEDICAL_LABEL_FIELD].sum())} with medical errors"
        )

    def _prepare_export(self):
        self.export_data = self.data
