import os

from pydantic_settings import BaseSettings, SettingsConfigDict


DEFAULT_LEXICON_FILEPATH = os.path.join(
    os.path.dirname(__file__), "data", "umls_lexicon.tsv"
)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="ASR_WARD_")

    # Caps worker threads for per-conversation and per-example work
    threads: int | None = None
    log_level: str = "INFO"

    # Local input files
    config_filepath: str | None = None
    lexicon_filepath: str = DEFAULT_LEXICON_FILEPATH


asr_ward_settings = Settings()
