from dataclasses import dataclass
import logging
import os

from asr_ward.manifests import manifest

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


@dataclass
class TaskManifest(manifest.Manifest):
    """
    One split of one detection task, written to `<out_dir>/<task>/<split>.jsonl`.

    Operates on data processed by these Processors:
    - LabelProcessor
    - DurationFilterProcessor
    - BalanceProcessor
    - SplitProcessor
    """

    task: str = manifest.ALL_ERRORS_TASK
    split: str = "train"
    lexicon_hash: str = ""
    out_dir: str = "."

    @property
    def output_path(self) -> str:
        return os.path.join(self.out_dir, self.task, f"{self.split}.jsonl")

    def _prepare_export(self):
        if manifest.SPLIT_FIELD in self.data.columns:
            self.export_data = self.data[self.data[manifest.SPLIT_FIELD] == self.split]
        else:
            self.export_data = self.data

    def export(self):
        dataset_manifest = self.to_manifest(self.split, self.lexicon_hash, self.task)
        manifest.write_manifest(dataset_manifest, self.output_path)
        logger.info(
            f"Wrote {len(dataset_manifest.examples)} examples to {self.output_path}"
        )
