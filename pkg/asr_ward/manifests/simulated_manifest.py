from dataclasses import dataclass

from asr_ward.manifests import manifest, task_manifest


@dataclass
class SimulatedManifest(task_manifest.TaskManifest):
    """
    Test split whose hypothesis errors were resampled by SimulateProcessor.
    Written to an explicit `path`, since it usually sits next to the source
    test manifest.
    """

    split: str = manifest.SIMULATED_SPLIT
    path: str = ""

    @property
    def output_path(self) -> str:
        return self.path or super().output_path

    def _prepare_export(self):
        self.export_data = self.data
