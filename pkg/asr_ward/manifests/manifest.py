from dataclasses import dataclass
import json
import logging
import os

import pandas
import pydantic

from asr_ward.errors import FormatError, IoError, SchemaError
from asr_ward.models import DatasetManifest, EntailmentExample, ManifestHeader

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


### Aligned pair record fields
CONVERSATION_FIELD = "conversation_id"
SEGMENT_INDEX_FIELD = "segment_index"
SPEAKER_FIELD = "speaker"
REF_START_FIELD = "ref_start_s"
REF_END_FIELD = "ref_end_s"
HYP_START_FIELD = "hyp_start_s"
HYP_END_FIELD = "hyp_end_s"
SCORE_FIELD = "score"
TRACE_FIELD = "trace"
###

### Example field names
ID_FIELD = "id"
AUDIO_PATH_FIELD = "audio_path"
START_FIELD = "start_s"
END_FIELD = "end_s"
HYP_TEXT_FIELD = "hyp_text"
REF_TEXT_FIELD = "ref_text"
LABEL_FIELD = "label"
MEDICAL_LABEL_FIELD = "medical_label"
TERM_HITS_FIELD = "term_hits"
HYP_CONFIDENCE_FIELD = "hyp_confidence"
###

### Internally used field names
SPLIT_FIELD = "split"
###

EXAMPLE_COLUMNS = [
    ID_FIELD,
    AUDIO_PATH_FIELD,
    START_FIELD,
    END_FIELD,
    HYP_TEXT_FIELD,
    LABEL_FIELD,
    MEDICAL_LABEL_FIELD,
    REF_TEXT_FIELD,
    TERM_HITS_FIELD,
    HYP_CONFIDENCE_FIELD,
]

ALL_ERRORS_TASK = "all_errors"
MEDICAL_ERRORS_TASK = "medical_errors"
TASK_TARGETS = {
    ALL_ERRORS_TASK: LABEL_FIELD,
    MEDICAL_ERRORS_TASK: MEDICAL_LABEL_FIELD,
}
SPLITS = ["train", "val", "test"]
SIMULATED_SPLIT = "test_simulated"

_EXAMPLE_KEYS = set(EntailmentExample.model_fields)
_HEADER_KEYS = set(ManifestHeader.model_fields)


def target_field(task: str | None) -> str:
    return TASK_TARGETS.get(task, LABEL_FIELD)


def confidence_list(value) -> list[float] | None:
    """Confidences from a frame cell, which holds NaN when a record had none"""
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return None


def examples_to_frame(examples: list[EntailmentExample]) -> pandas.DataFrame:
    rows = []
    for example in examples:
        rows.append(
            {
                ID_FIELD: example.id,
                AUDIO_PATH_FIELD: example.audio_ref.path,
                START_FIELD: example.audio_ref.start_s,
                END_FIELD: example.audio_ref.end_s,
                HYP_TEXT_FIELD: example.hyp_text,
                LABEL_FIELD: example.label,
                MEDICAL_LABEL_FIELD: example.medical_label,
                REF_TEXT_FIELD: example.ref_text,
                TERM_HITS_FIELD: [hit.model_dump() for hit in example.term_hits],
                HYP_CONFIDENCE_FIELD: example.hyp_confidence,
            }
        )
    return pandas.DataFrame(rows, columns=EXAMPLE_COLUMNS)


def frame_to_examples(data: pandas.DataFrame) -> list[EntailmentExample]:
    examples = []
    for row in data.to_dict("records"):
        medical_label = row[MEDICAL_LABEL_FIELD]
        examples.append(
            EntailmentExample(
                id=row[ID_FIELD],
                audio_ref={
                    "path": row[AUDIO_PATH_FIELD],
                    "start_s": float(row[START_FIELD]),
                    "end_s": float(row[END_FIELD]),
                },
                hyp_text=row[HYP_TEXT_FIELD],
                label=int(row[LABEL_FIELD]),
                medical_label=(
                    None if pandas.isna(medical_label) else int(medical_label)
                ),
                ref_text=row[REF_TEXT_FIELD],
                term_hits=row[TERM_HITS_FIELD],
                hyp_confidence=confidence_list(row.get(HYP_CONFIDENCE_FIELD)),
            )
        )
    return examples


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False) + "\n"


def write_manifest(manifest: DatasetManifest, path: str):
    """JSON lines: one header object, then one object per example"""
    lines = [_dump_line(manifest.header.model_dump(mode="json"))]
    for example in manifest.examples:
        lines.append(_dump_line(example.model_dump(mode="json")))

    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(lines)
    except OSError as e:
        raise IoError(f"Cannot write manifest {path}: {e}")


def _parse_line(line: str, line_number: int, path: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON: {e.msg}", line=line_number)
    if not isinstance(obj, dict):
        raise SchemaError(f"{path} line {line_number}: expected a JSON object")
    return obj


def _warn_extra_keys(obj: dict, known: set[str], line_number: int, path: str):
    extra = sorted(set(obj) - known)
    if extra:
        logger.warning(f"{path} line {line_number}: ignoring unknown fields {extra}")


def read_manifest(path: str) -> DatasetManifest:
    try:
        with open(path, encoding="utf-8") as f:
            lines = [line for line in f.read().splitlines()]
    except OSError as e:
        raise IoError(f"Cannot read manifest {path}: {e}")

    numbered = [(i, line) for i, line in enumerate(lines, start=1) if line.strip()]
    if not numbered:
        raise SchemaError(f"Manifest {path} has no header line")

    header_number, header_line = numbered[0]
    header_obj = _parse_line(header_line, header_number, path)
    _warn_extra_keys(header_obj, _HEADER_KEYS, header_number, path)
    try:
        header = ManifestHeader.model_validate(header_obj)
    except pydantic.ValidationError as e:
        raise SchemaError(f"{path} line {header_number}: invalid header: {e}")

    examples = []
    for line_number, line in numbered[1:]:
        obj = _parse_line(line, line_number, path)
        _warn_extra_keys(obj, _EXAMPLE_KEYS, line_number, path)
        try:
            examples.append(EntailmentExample.model_validate(obj))
        except pydantic.ValidationError as e:
            raise SchemaError(f"{path} line {line_number}: invalid example: {e}")

    try:
        return DatasetManifest(
            split=header.split,
            seed=header.seed,
            lexicon_hash=header.lexicon_hash,
            task=header.task,
            examples=examples,
        )
    except pydantic.ValidationError as e:
        raise SchemaError(f"Invalid manifest {path}: {e}")


@dataclass
class Manifest:
    """Base for DataFrame pipeline stages that end in a manifest file"""

    export_columns_list = EXAMPLE_COLUMNS

    seed: int
    data: pandas.DataFrame
    export_data = None

    def process(self):
        self._prepare()
        self._process()
        self._prepare_export()

    def _prepare(self):
        """Prepares the data for processing.

        Implement in subclass if necessary. May add or remove columns
        necessary for processing, add or remove rows, or validate the data.
        """
        pass

    def _process(self):
        """Processes the data.

        Implement in subclass if necessary. Labels, filters, samples or
        rewrites examples.
        """
        pass

    def _prepare_export(self):
        """Prepares the data for export.

        Implement in subclass if necessary. May add or remove rows that
        should or should not be exported after processing."""
        pass

    def _filter_columns(self):
        self.export_data = self.export_data[self.export_columns_list]

    def to_manifest(self, split: str, lexicon_hash: str, task: str | None = None):
        self._filter_columns()
        return DatasetManifest(
            split=split,
            seed=self.seed,
            lexicon_hash=lexicon_hash,
            task=task,
            examples=frame_to_examples(self.export_data),
        )
