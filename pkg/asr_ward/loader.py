import functools
import json
import logging
import os

import pandas
import pydantic

from asr_ward import ontology, util
from asr_ward.errors import FormatError, IoError, SchemaError
from asr_ward.models import Conversation, PipelineConfig
from asr_ward.settings import asr_ward_settings
from asr_ward.textnorm import normalize

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


def _read_text(filepath: str, what: str) -> str:
    try:
        with open(filepath, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise IoError(f"Cannot read {what} {filepath}: {e}")


def _read_json(filepath: str, what: str):
    try:
        return json.loads(_read_text(filepath, what))
    except json.JSONDecodeError as e:
        raise FormatError(f"{filepath}: invalid JSON: {e.msg}", line=e.lineno)


def read_jsonl(filepath: str, what: str) -> list[dict]:
    records = []
    for line_number, line in enumerate(
        _read_text(filepath, what).splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise FormatError(f"{filepath}: invalid JSON: {e.msg}", line=line_number)
    return records


class Loader:
    @functools.lru_cache
    def get_pipeline_config(self, config_filepath: str | None = None) -> PipelineConfig:
        """Pipeline config from a JSON file, falling back to the
        ASR_WARD_CONFIG_FILEPATH setting and then to defaults."""
        config_filepath = config_filepath or asr_ward_settings.config_filepath
        if not config_filepath:
            return PipelineConfig()
        try:
            return PipelineConfig.model_validate(_read_json(config_filepath, "config"))
        except pydantic.ValidationError as e:
            raise SchemaError(f"Invalid config {config_filepath}: {e}")

    @functools.lru_cache
    def get_lexicon(self, lexicon_filepath: str | None = None) -> ontology.Lexicon:
        return ontology.load_lexicon(
            lexicon_filepath or asr_ward_settings.lexicon_filepath
        )

    @functools.lru_cache
    def get_lexicon_hash(self, lexicon_filepath: str | None = None) -> str:
        lexicon_filepath = lexicon_filepath or asr_ward_settings.lexicon_filepath
        try:
            return util.file_sha256(lexicon_filepath)
        except OSError as e:
            raise IoError(f"Cannot read lexicon {lexicon_filepath}: {e}")

    def load_conversation(self, filepath: str) -> Conversation:
        """Reads a conversation JSON file. A relative `audio_path` is resolved
        against the file's directory and defaults to `<conversation_id>.wav`."""
        try:
            conversation = Conversation.model_validate(
                _read_json(filepath, "transcript")
            )
        except pydantic.ValidationError as e:
            raise SchemaError(f"Invalid transcript {filepath}: {e}")

        audio_path = conversation.audio_path or f"{conversation.conversation_id}.wav"
        if not os.path.isabs(audio_path):
            audio_path = os.path.join(os.path.dirname(filepath), audio_path)
        return conversation.model_copy(update={"audio_path": audio_path})

    def load_conversations(self, path: str) -> dict[str, Conversation]:
        """A single transcript file, or every `*.json` file of a directory,
        keyed by conversation id."""
        if os.path.isdir(path):
            filepaths = [
                os.path.join(path, name)
                for name in sorted(os.listdir(path))
                if name.endswith(".json")
            ]
        elif os.path.exists(path):
            filepaths = [path]
        else:
            raise IoError(f"No such transcript file or directory: {path}")

        conversations = {}
        for filepath in filepaths:
            conversation = self.load_conversation(filepath)
            if conversation.conversation_id in conversations:
                raise SchemaError(
                    f"Duplicate conversation id {conversation.conversation_id} "
                    f"in {filepath}"
                )
            conversations[conversation.conversation_id] = conversation
        return conversations

    def load_aligned_pairs(self, filepath: str) -> pandas.DataFrame:
        return pandas.DataFrame(read_jsonl(filepath, "aligned pairs"))

    def load_vocab(self, filepath: str) -> list[str]:
        """Vocabulary file, one word per line, normalized like transcripts"""
        vocab = []
        for line in _read_text(filepath, "vocabulary").splitlines():
            vocab.extend(token.norm for token in normalize(line))
        return vocab


loader = Loader()
