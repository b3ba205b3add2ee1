from unittest import TestCase

import pytest

from asr_ward.errors import SchemaError
from asr_ward.manifests import manifest
from asr_ward.processors import duration_filter_processor
from asr_ward.tests import util


class TestDurationFilterProcessor(TestCase):
    def test_bounds_inclusive(self):
        examples = [
            util.new_example(id="c1/0000", start_s=0.0, end_s=0.5),
            util.new_example(id="c1/0001", start_s=0.0, end_s=30.0),
            util.new_example(id="c1/0002", start_s=1.0, end_s=13.3),
            util.new_example(id="c1/0003", start_s=2.0, end_s=3.0),
            util.new_example(id="c1/0004", start_s=0.0, end_s=30.5),
        ]
        proc = util.new_duration_filter_processor(data=util.examples_frame(examples))
        proc.process()

        assert list(proc.data[manifest.ID_FIELD]) == ["c1/0001", "c1/0002", "c1/0003"]
        assert list(proc.data.index) == [0, 1, 2]

    def test_custom_bounds(self):
        examples = [
            util.new_example(id="c1/0000", start_s=0.0, end_s=0.5),
            util.new_example(id="c1/0001", start_s=0.0, end_s=5.0),
        ]
        proc = util.new_duration_filter_processor(
            data=util.examples_frame(examples), min_s=0.25, max_s=1.0
        )
        proc.process()
        assert list(proc.data[manifest.ID_FIELD]) == ["c1/0000"]

    def test_empty(self):
        proc = util.new_duration_filter_processor()
        proc.process()
        assert proc.data.empty

    def test_filter_examples(self):
        examples = [
            util.new_example(id="c1/0000", start_s=0.0, end_s=0.5),
            util.new_example(id="c1/0001", start_s=0.0, end_s=12.3),
        ]
        kept = duration_filter_processor.filter_duration(examples)
        assert [e.id for e in kept] == ["c1/0001"]

    def test_missing_times(self):
        data = util.examples_frame([util.new_example()]).drop(
            columns=[manifest.END_FIELD]
        )
        proc = util.new_duration_filter_processor(data=data)
        with pytest.raises(SchemaError):
            proc.process()
