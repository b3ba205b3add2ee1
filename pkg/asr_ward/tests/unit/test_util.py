from unittest import TestCase, mock
import json
import os

import pydantic
import pytest

from asr_ward import util
from asr_ward.errors import FormatError, IoError, SchemaError
from asr_ward.loader import Loader, read_jsonl
from asr_ward.models import (
    AlignParams,
    EncoderKind,
    EncoderSpec,
    EntailmentExample,
    PipelineConfig,
    TrainConfig,
    Utterance,
)
from asr_ward.settings import Settings, asr_ward_settings
from asr_ward.tests import util as test_utils
from asr_ward.tests.base import BaseTestCaseWithTempDir


class TestHashing(TestCase):
    def test_stable_hash(self):
        assert util.stable_hash64("flu") == util.stable_hash64("flu")
        assert util.stable_hash64("flu") != util.stable_hash64("flew")
        assert 0 <= util.stable_hash64("flu") < 2**64

    def test_derive_seed(self):
        assert util.derive_seed(0, "c1/0000") == util.derive_seed(0, "c1/0000")
        assert util.derive_seed(0, "c1/0000") != util.derive_seed(1, "c1/0000")
        assert util.derive_seed(0, "c1/0000") != util.derive_seed(0, "c1/0001")

    def test_example_ids(self):
        example_id = util.make_example_id("visit/7", 12)
        assert example_id == "visit/7/0012"
        assert util.conversation_of(example_id) == "visit/7"


class TestWorkerCount(TestCase):
    def tearDown(self):
        asr_ward_settings.threads = None

    def test_threads_setting(self):
        asr_ward_settings.threads = 3
        assert util.get_worker_count() == 3
        asr_ward_settings.threads = None
        assert util.get_worker_count() >= 1

    @mock.patch.dict("os.environ", {"ASR_WARD_THREADS": "2"})
    def test_env_var(self):
        assert Settings().threads == 2


class TestModels(TestCase):
    def test_align_params(self):
        assert AlignParams() == AlignParams(
            match_score=2, mismatch_penalty=-1, gap_penalty=-1
        )
        testcases = [
            {"match_score": 0},
            {"mismatch_penalty": 1},
            {"gap_penalty": 0.5},
            {"gap_penalty": -2},
            {"unknown": 1},
        ]
        for kwargs in testcases:
            with pytest.raises(pydantic.ValidationError):
                AlignParams(**kwargs)

    def test_utterance_times(self):
        with pytest.raises(pydantic.ValidationError):
            Utterance(start_s=2.0, end_s=1.0, text="hi")
        with pytest.raises(pydantic.ValidationError):
            Utterance(start_s=-1.0, end_s=1.0, text="hi")

    def test_utterance_confidence(self):
        utterance = Utterance(
            start_s=0.0, end_s=1.0, text="keep it, daily.", confidence=[0.9, 0.5, 1.0]
        )
        assert utterance.confidence == [0.9, 0.5, 1.0]
        with pytest.raises(pydantic.ValidationError):
            Utterance(start_s=0.0, end_s=1.0, text="keep it", confidence=[0.9])
        with pytest.raises(pydantic.ValidationError):
            Utterance(start_s=0.0, end_s=1.0, text="keep it", confidence=[0.9, 1.5])

    def test_example_confidence_per_hypothesis_word(self):
        example = test_utils.new_example(
            hyp_text="keep her on the civil court",
            hyp_confidence=[0.9, 0.9, 0.8, 0.9, 0.4, 0.3],
        )
        assert len(example.hyp_confidence) == 6
        with pytest.raises(pydantic.ValidationError):
            test_utils.new_example(hyp_confidence=[0.9])

    def test_train_config(self):
        assert TrainConfig().learning_rate == 1e-3
        with pytest.raises(pydantic.ValidationError):
            TrainConfig(learning_rate=-1)
        with pytest.raises(pydantic.ValidationError):
            TrainConfig(batch_size=0)

    def test_encoder_specs(self):
        with pytest.raises(pydantic.ValidationError):
            EncoderSpec(kind=EncoderKind.TOY_ACOUSTIC, dim=8)
        with pytest.raises(pydantic.ValidationError):
            EncoderSpec(kind=EncoderKind.FILE_LINGUISTIC, dim=8)

    def test_pipeline_config(self):
        config = PipelineConfig()
        assert config.duration_bounds == (1.0, 30.0)
        assert config.dims.d_a == 11
        assert config.dims.d_l == 16
        assert config.dims.d_proj == 64
        with pytest.raises(pydantic.ValidationError):
            PipelineConfig(duration_bounds=(30, 1))
        with pytest.raises(pydantic.ValidationError):
            PipelineConfig(acoustic={"kind": "ToyLinguistic", "dim": 16})

    def test_example_empty_hypothesis_is_an_error(self):
        with pytest.raises(pydantic.ValidationError):
            test_utils.new_example(hyp_text="", label=0)
        example = test_utils.new_example(hyp_text="", label=1)
        assert isinstance(example, EntailmentExample)

    def test_manifest_ids_unique(self):
        example = test_utils.new_example()
        with pytest.raises(pydantic.ValidationError):
            test_utils.new_manifest([example, example])


class TestLoader(BaseTestCaseWithTempDir):
    def setUp(self):
        super().setUp()
        self.loader = Loader()

    def test_default_config(self):
        assert self.loader.get_pipeline_config() == PipelineConfig()

    def test_config_file(self):
        path = self.write_file(
            "config.json",
            json.dumps(
                {"seed": 7, "train": {"epochs": 3}, "align": {"match_score": 3}}
            ),
        )
        config = self.loader.get_pipeline_config(path)
        assert config.seed == 7
        assert config.train.epochs == 3
        assert config.align.match_score == 3
        assert config.align.gap_penalty == -1

    def test_bad_config(self):
        path = self.write_file("config.json", json.dumps({"seed": 7, "colour": "red"}))
        with pytest.raises(SchemaError):
            self.loader.get_pipeline_config(path)
        path = self.write_file("broken.json", "{")
        with pytest.raises(FormatError):
            self.loader.get_pipeline_config(path)
        with pytest.raises(IoError):
            self.loader.get_pipeline_config(os.path.join(self.tempdir, "none.json"))

    def test_conversations(self):
        utterances = [{"speaker": "doctor", "start_s": 0, "end_s": 2, "text": "Hi."}]
        test_utils.write_conversation(
            os.path.join(self.tempdir, "a.json"), "visit-a", utterances
        )
        test_utils.write_conversation(
            os.path.join(self.tempdir, "b.json"),
            "visit-b",
            utterances,
            audio_path="audio/b.wav",
        )
        self.write_file("notes.txt", "ignored")

        conversations = self.loader.load_conversations(str(self.tempdir))
        assert list(conversations) == ["visit-a", "visit-b"]
        assert conversations["visit-a"].audio_path == os.path.join(
            self.tempdir, "visit-a.wav"
        )
        assert conversations["visit-b"].audio_path == os.path.join(
            self.tempdir, "audio/b.wav"
        )

        single = self.loader.load_conversations(os.path.join(self.tempdir, "a.json"))
        assert list(single) == ["visit-a"]

    def test_conversation_errors(self):
        utterances = [{"start_s": 0, "end_s": 2, "text": "Hi."}]
        test_utils.write_conversation(
            os.path.join(self.tempdir, "a.json"), "same", utterances
        )
        test_utils.write_conversation(
            os.path.join(self.tempdir, "b.json"), "same", utterances
        )
        with pytest.raises(SchemaError):
            self.loader.load_conversations(str(self.tempdir))

        bad = self.write_file("bad.json", json.dumps({"conversation_id": "x"}))
        with pytest.raises(SchemaError):
            self.loader.load_conversation(bad)

        with pytest.raises(IoError):
            self.loader.load_conversations(os.path.join(self.tempdir, "missing"))

    def test_vocab(self):
        path = self.write_file("vocab.txt", "Flu\nwalking\n\nchest pains\n")
        assert self.loader.load_vocab(path) == ["flu", "walk", "chest", "pain"]

    def test_read_jsonl(self):
        path = self.write_file("pairs.jsonl", '{"a": 1}\n\n{"a": 2}\n')
        assert read_jsonl(path, "pairs") == [{"a": 1}, {"a": 2}]
        path = self.write_file("broken.jsonl", '{"a": 1}\n{"a":\n')
        with pytest.raises(FormatError) as e:
            read_jsonl(path, "pairs")
        assert e.value.line == 2

    def test_lexicon_hash(self):
        path = self.write_file("lexicon.tsv", "flu\tDisorders\n")
        other = self.write_file("other.tsv", "flu\tDisorders\nheart\tAnatomy\n")
        assert self.loader.get_lexicon_hash(path) == util.file_sha256(path)
        assert self.loader.get_lexicon_hash(path) != self.loader.get_lexicon_hash(other)
        assert len(self.loader.get_lexicon(other)) == 2
