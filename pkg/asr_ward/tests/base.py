import tempfile
import shutil
from pathlib import Path
from unittest import TestCase


class BaseTestCaseWithTempDir(TestCase):
    def setUp(self):
        self.tempdir = Path(tempfile.mkdtemp(prefix="asr_ward_"))

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def write_file(self, name: str, content: str) -> str:
        """Writes UTF-8 text under the temp dir and returns its path"""
        path = self.tempdir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        return str(path)
