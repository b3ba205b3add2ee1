from unittest import TestCase

import pandas
import pytest

from asr_ward import ontology
from asr_ward.errors import SchemaError
from asr_ward.manifests import manifest
from asr_ward.tests import util


def new_lexicon():
    return ontology.Lexicon.from_terms(
        {
            "symbicort": ontology.SemanticGroup.CHEMICALS_AND_DRUGS,
            "coumadin": ontology.SemanticGroup.CHEMICALS_AND_DRUGS,
            "chest pain": ontology.SemanticGroup.DISORDERS,
        }
    )


class TestLabelProcessor(TestCase):
    def label(self, conversations):
        proc = util.new_label_processor(
            data=util.aligned_frame(conversations), lexicon=new_lexicon()
        )
        proc.process()
        return proc.data

    def test_labels(self):
        data = self.label(
            {
                "c1": [("Keep her on the symbicort", "Keep her on the civil court")],
                "c2": [
                    (
                        "probably you won't give a timetable",
                        "probably you want to give a timetable",
                    )
                ],
                "c3": [("the chest pain is gone", "the chest pain is gone")],
            }
        )
        assert list(data[manifest.ID_FIELD]) == ["c1/0000", "c2/0000", "c3/0000"]
        assert list(data[manifest.LABEL_FIELD]) == [1, 1, 0]
        assert list(data[manifest.MEDICAL_LABEL_FIELD]) == [1, 0, 0]
        assert list(data.columns) == manifest.EXAMPLE_COLUMNS

    def test_term_hits_on_reference(self):
        data = self.label(
            {"c1": [("Keep her on the symbicort", "Keep her on the civil court")]}
        )
        (hits,) = data[manifest.TERM_HITS_FIELD]
        assert [(h["term"], h["group"]) for h in hits] == [
            ("symbicort", "ChemicalsAndDrugs")
        ]
        assert data[manifest.REF_TEXT_FIELD][0] == "Keep her on the symbicort"
        assert data[manifest.HYP_TEXT_FIELD][0] == "Keep her on the civil court"

    def test_medical_label_needs_the_term_missing(self):
        data = self.label(
            {
                "c1": [
                    (
                        "keep her on the coumadin daily",
                        "keep her on the coumadin today",
                    )
                ],
                "c2": [("she takes coumadin", "she takes")],
            }
        )
        assert list(data[manifest.LABEL_FIELD]) == [1, 1]
        assert list(data[manifest.MEDICAL_LABEL_FIELD]) == [0, 1]

    def test_audio_window(self):
        data = self.label(
            {
                "c1": [
                    ("how are you feeling", "how are you feeling"),
                    ("any chest pain today", "any chest pain today"),
                ]
            }
        )
        assert list(data[manifest.START_FIELD]) == [0.0, 2.0]
        assert list(data[manifest.END_FIELD]) == [2.0, 4.0]
        assert list(data[manifest.AUDIO_PATH_FIELD]) == ["c1.wav", "c1.wav"]

    def test_ordered_by_id(self):
        data = self.label(
            {
                "b": [("hello there", "hello there")],
                "a": [("hello there", "hello there"), ("goodbye now", "good buy now")],
            }
        )
        assert list(data[manifest.ID_FIELD]) == ["a/0000", "a/0001", "b/0000"]

    def test_empty(self):
        proc = util.new_label_processor(data=pandas.DataFrame())
        proc.process()
        assert proc.data.empty
        assert list(proc.data.columns) == manifest.EXAMPLE_COLUMNS

    def test_missing_fields(self):
        proc = util.new_label_processor(
            data=pandas.DataFrame({manifest.CONVERSATION_FIELD: ["c1"]})
        )
        with pytest.raises(SchemaError):
            proc.process()

    def test_carries_hypothesis_confidence(self):
        conversations = {
            "c1": [
                ("Keep her on the symbicort.", "Keep her on the civil court."),
                ("See you soon", "See you soon"),
            ],
            "c2": [("hello there", "hello there")],
        }
        confidences = {
            "c1": [[0.9, 0.8, 0.9, 0.9, 0.3, 0.2], [0.7, 0.9, 1.0]],
        }
        proc = util.new_label_processor(
            data=util.aligned_frame(conversations, confidences), lexicon=new_lexicon()
        )
        proc.process()
        assert proc.data[manifest.HYP_CONFIDENCE_FIELD][0] == [
            0.9,
            0.8,
            0.9,
            0.9,
            0.3,
            0.2,
        ]
        assert proc.data[manifest.HYP_CONFIDENCE_FIELD][1] == [0.7, 0.9, 1.0]
        assert proc.data[manifest.HYP_CONFIDENCE_FIELD][2] is None

        examples = manifest.frame_to_examples(proc.data)
        assert examples[1].hyp_confidence == [0.7, 0.9, 1.0]
        assert examples[2].hyp_confidence is None
