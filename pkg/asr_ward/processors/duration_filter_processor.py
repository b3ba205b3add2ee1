from dataclasses import dataclass
import logging

from asr_ward.manifests import manifest
from asr_ward.models import EntailmentExample
from asr_ward.processors import processor

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


MIN_DURATION_S = 1.0
MAX_DURATION_S = 30.0


def filter_duration(
    examples: list[EntailmentExample],
    min_s: float = MIN_DURATION_S,
    max_s: float = MAX_DURATION_S,
) -> list[EntailmentExample]:
    """Keeps examples whose audio lasts between `min_s` and `max_s`, inclusive"""
    return [e for e in examples if min_s <= e.audio_ref.duration_s <= max_s]


@dataclass
class DurationFilterProcessor(processor.Processor):
    min_s: float = MIN_DURATION_S
    max_s: float = MAX_DURATION_S

    required_columns = [manifest.START_FIELD, manifest.END_FIELD]

    def _process(self):
        duration = self.data[manifest.END_FIELD] - self.data[manifest.START_FIELD]
        keep = (duration >= self.min_s) & (duration <= self.max_s)
        dropped = int((~keep).sum())
        if dropped:
            logger.info(
                f"Dropped {dropped} examples outside "
                f"[{self.min_s}, {self.max_s}] seconds"
            )
        self.data = self.data[keep].reset_index(drop=True)

    def _prepare_export(self):
        self.export_data = self.data
