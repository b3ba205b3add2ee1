from dataclasses import dataclass, field
import logging

import pandas

from asr_ward import simulate
from asr_ward.manifests import manifest
from asr_ward.models import AlignParams
from asr_ward.processors import processor

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


@dataclass
class SimulateProcessor(processor.Processor):
    """Rewrites hypothesis text of error examples with resampled confusions.
    Labels, audio and reference text are left untouched."""

    confusion: simulate.ConfusionModel = None
    align_params: AlignParams = field(default_factory=AlignParams)
    skipped: int = 0

    required_columns = manifest.EXAMPLE_COLUMNS

    def _prepare(self):
        if self.confusion is None:
            raise ValueError("SimulateProcessor needs a confusion model")
        super()._prepare()

    def _process(self):
        examples = manifest.frame_to_examples(self.data)
        hyp_texts = []
        confidences = []
        self.skipped = 0
        for example in examples:
            simulated, skipped = simulate.simulate_example(
                example, self.confusion, self.align_params
            )
            hyp_texts.append(simulated.hyp_text)
            confidences.append(simulated.hyp_confidence)
            self.skipped += skipped

        self.data = self.data.copy()
        self.data[manifest.HYP_TEXT_FIELD] = hyp_texts
        self.data[manifest.HYP_CONFIDENCE_FIELD] = pandas.Series(
            confidences, index=self.data.index, dtype=object
        )
        if self.skipped:
            logger.warning(
                f"{self.skipped} substitutions had no confusion candidates "
                "and were kept"
            )

    def _prepare_export(self):
        self.export_data = self.data
