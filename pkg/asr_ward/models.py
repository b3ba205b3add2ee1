from enum import Enum
from typing import Annotated, Literal

import pydantic


def validate_nonnegative(v: float) -> float:
    if v < 0:
        raise ValueError(f"Invalid time {v}. Must be >= 0 seconds")
    return v


SecondsField = Annotated[float, pydantic.AfterValidator(validate_nonnegative)]


### Conversation transcripts
class Utterance(pydantic.BaseModel):
    speaker: str = ""
    start_s: SecondsField
    end_s: SecondsField
    text: str
    confidence: list[float] | None = None

    model_config = pydantic.ConfigDict(extra="ignore")

    @pydantic.model_validator(mode="after")
    def validate_time_order(self):
        if self.end_s <= self.start_s:
            raise ValueError(
                f"Utterance ends at {self.end_s} before it starts at {self.start_s}"
            )
        return self

    @pydantic.model_validator(mode="after")
    def validate_confidence(self):
        """One ASR confidence in [0, 1] per whitespace word of `text`"""
        if self.confidence is None:
            return self
        words = len(self.text.split())
        if len(self.confidence) != words:
            raise ValueError(
                f"Utterance has {words} words but {len(self.confidence)} "
                "confidence scores"
            )
        if any(not 0 <= c <= 1 for c in self.confidence):
            raise ValueError(f"Confidence scores must be in [0, 1]: {self.confidence}")
        return self


class Conversation(pydantic.BaseModel):
    conversation_id: str
    utterances: list[Utterance]
    audio_path: str | None = None

    model_config = pydantic.ConfigDict(extra="ignore")


### Pipeline configuration
class AlignParams(pydantic.BaseModel):
    match_score: float = 2.0
    mismatch_penalty: float = -1.0
    gap_penalty: float = -1.0

    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)

    @pydantic.model_validator(mode="after")
    def validate_scores(self):
        if self.match_score <= 0:
            raise ValueError(f"match_score must be > 0, got {self.match_score}")
        if self.mismatch_penalty > 0:
            raise ValueError(
                f"mismatch_penalty must be <= 0, got {self.mismatch_penalty}"
            )
        if self.gap_penalty > 0:
            raise ValueError(f"gap_penalty must be <= 0, got {self.gap_penalty}")
        if abs(self.gap_penalty) >= self.match_score:
            raise ValueError(
                f"|gap_penalty| ({abs(self.gap_penalty)}) must be smaller than "
                f"match_score ({self.match_score})"
            )
        return self


class Optimizer(str, Enum):
    SGD = "SGD"
    ADAM = "Adam"


class TrainConfig(pydantic.BaseModel):
    learning_rate: float = 1e-3
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    optimizer: Optimizer = Optimizer.ADAM
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    model_config = pydantic.ConfigDict(extra="forbid")

    @pydantic.field_validator("learning_rate")
    @classmethod
    def validate_learning_rate(cls, v):
        if v < 0:
            raise ValueError(f"learning_rate must be >= 0, got {v}")
        return v

    @pydantic.field_validator("epochs", "batch_size")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError(f"Must be >= 1, got {v}")
        return v


class EncoderKind(str, Enum):
    FILE_ACOUSTIC = "FileAcoustic"
    FILE_LINGUISTIC = "FileLinguistic"
    TOY_ACOUSTIC = "ToyAcoustic"
    TOY_LINGUISTIC = "ToyLinguistic"


ACOUSTIC_KINDS = (EncoderKind.FILE_ACOUSTIC, EncoderKind.TOY_ACOUSTIC)
LINGUISTIC_KINDS = (EncoderKind.FILE_LINGUISTIC, EncoderKind.TOY_LINGUISTIC)


class EncoderSpec(pydantic.BaseModel):
    kind: EncoderKind
    dim: int
    params: dict[str, str | int | float] = {}

    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)

    @pydantic.model_validator(mode="after")
    def validate_dim(self):
        if self.dim < 1:
            raise ValueError(f"Encoder dim must be >= 1, got {self.dim}")
        if self.kind == EncoderKind.TOY_ACOUSTIC and self.dim < 11:
            raise ValueError(f"ToyAcoustic produces 11 features, dim {self.dim} < 11")
        if self.kind == EncoderKind.TOY_LINGUISTIC and self.dim < 8:
            raise ValueError(f"ToyLinguistic needs dim >= 8, got {self.dim}")
        if (
            self.kind in (EncoderKind.FILE_ACOUSTIC, EncoderKind.FILE_LINGUISTIC)
            and "dir" not in self.params
        ):
            raise ValueError(f"{self.kind.value} encoder needs a 'dir' param")
        return self


def default_acoustic_spec() -> EncoderSpec:
    return EncoderSpec(
        kind=EncoderKind.TOY_ACOUSTIC, dim=11, params={"frame_ms": 25, "hop_ms": 10}
    )


def default_linguistic_spec() -> EncoderSpec:
    return EncoderSpec(kind=EncoderKind.TOY_LINGUISTIC, dim=16)


class Dims(pydantic.BaseModel):
    d_a: int
    d_l: int
    d_proj: int = 64

    model_config = pydantic.ConfigDict(extra="forbid")

    @pydantic.model_validator(mode="after")
    def validate_positive(self):
        for name in ("d_a", "d_l", "d_proj"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        return self


class PipelineConfig(pydantic.BaseModel):
    align: AlignParams = AlignParams()
    lexicon_path: str | None = None
    seed: int = 0
    d_proj: int = 64
    train: TrainConfig = TrainConfig()
    acoustic: EncoderSpec = pydantic.Field(default_factory=default_acoustic_spec)
    linguistic: EncoderSpec = pydantic.Field(default_factory=default_linguistic_spec)
    duration_bounds: tuple[float, float] = (1.0, 30.0)
    threshold: float = 0.5
    max_edit: int = 2
    report_top_k: int = 5
    report_cutoff: int = 10

    model_config = pydantic.ConfigDict(extra="forbid")

    @pydantic.model_validator(mode="after")
    def validate_encoders(self):
        if self.acoustic.kind not in ACOUSTIC_KINDS:
            raise ValueError(f"{self.acoustic.kind.value} is not an acoustic encoder")
        if self.linguistic.kind not in LINGUISTIC_KINDS:
            raise ValueError(
                f"{self.linguistic.kind.value} is not a linguistic encoder"
            )
        return self

    @pydantic.model_validator(mode="after")
    def validate_duration_bounds(self):
        min_s, max_s = self.duration_bounds
        if not 0 <= min_s <= max_s:
            raise ValueError(f"Invalid duration bounds {self.duration_bounds}")
        return self

    @pydantic.model_validator(mode="after")
    def validate_max_edit(self):
        if self.max_edit < 1:
            raise ValueError(f"max_edit must be >= 1, got {self.max_edit}")
        return self

    @property
    def dims(self) -> Dims:
        return Dims(d_a=self.acoustic.dim, d_l=self.linguistic.dim, d_proj=self.d_proj)


### Dataset manifests
class AudioRef(pydantic.BaseModel):
    path: str
    start_s: float
    end_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


class TermHitRecord(pydantic.BaseModel):
    term: str
    group: str
    start: int
    len: int


class EntailmentExample(pydantic.BaseModel):
    id: str
    audio_ref: AudioRef
    hyp_text: str
    label: Literal[0, 1]
    medical_label: Literal[0, 1] | None
    ref_text: str
    term_hits: list[TermHitRecord]
    hyp_confidence: list[float] | None = None

    model_config = pydantic.ConfigDict(extra="ignore")

    @pydantic.model_validator(mode="after")
    def validate_empty_hypothesis(self):
        if not self.hyp_text.strip() and self.label != 1:
            raise ValueError(f"Example {self.id} has empty hypothesis but label 0")
        return self

    @pydantic.model_validator(mode="after")
    def validate_hyp_confidence(self):
        words = len(self.hyp_text.split())
        if self.hyp_confidence is not None and len(self.hyp_confidence) != words:
            raise ValueError(
                f"Example {self.id} has {words} hypothesis words but "
                f"{len(self.hyp_confidence)} confidence scores"
            )
        return self


class ManifestHeader(pydantic.BaseModel):
    split: str
    seed: int
    lexicon_hash: str
    task: str | None = None

    model_config = pydantic.ConfigDict(extra="ignore")


class DatasetManifest(pydantic.BaseModel):
    split: str
    seed: int
    lexicon_hash: str
    task: str | None = None
    examples: list[EntailmentExample]

    @pydantic.model_validator(mode="after")
    def validate_unique_ids(self):
        seen = set()
        for example in self.examples:
            if example.id in seen:
                raise ValueError(f"Duplicate example id {example.id}")
            seen.add(example.id)
        return self

    @property
    def header(self) -> ManifestHeader:
        return ManifestHeader(
            split=self.split,
            seed=self.seed,
            lexicon_hash=self.lexicon_hash,
            task=self.task,
        )
