from dataclasses import dataclass

from asr_ward.errors import SchemaError
from asr_ward.manifests import manifest


@dataclass
class Processor(manifest.Manifest):
    """Stage over a frame of examples. A non-empty input frame must carry
    every column in `required_columns`."""

    required_columns = [manifest.ID_FIELD]

    def _prepare(self):
        missing = [c for c in self.required_columns if c not in self.data.columns]
        if len(self.data) and missing:
            raise SchemaError(
                f"{type(self).__name__} input is missing fields {missing}"
            )
