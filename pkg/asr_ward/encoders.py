"""Frozen feature providers for the acoustic and linguistic sides.

Real pretrained encoders run elsewhere and hand their outputs over as feature
files. The toy providers compute small deterministic features so the pipeline
runs end to end without any neural framework.
"""

from dataclasses import dataclass
import functools
import logging
import os

import numpy
import scipy.io.wavfile

from asr_ward import util
from asr_ward.errors import (
    DimMismatch,
    EmptyInput,
    EncoderResolutionError,
    FormatError,
    IoError,
    RangeError,
    SchemaError,
    TooShort,
)
from asr_ward.models import EncoderKind, EncoderSpec, EntailmentExample
from asr_ward.textnorm import Token, normalize

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


FEATURE_MAGIC = b"AWFEAT1\0"
FEATURE_HEADER_DTYPE = numpy.dtype("<u4")
FEATURE_DTYPE = numpy.dtype("<f4")
FEATURE_SUFFIX = ".awfeat"

SILENCE_VARIANCE = 1e-12
LOG_FLOOR = 1e-8
TOY_ACOUSTIC_FEATURES = 11
BAND_COUNT = 8
EMPTY_TOKEN = Token(surface="<empty>", norm="<empty>", source_index=0)


@dataclass
class AudioSegment:
    samples: numpy.ndarray
    sample_rate: int
    source: tuple[str, float, float]
    silent: bool = False


@dataclass
class FeatureSequence:
    frames: numpy.ndarray

    def __post_init__(self):
        if self.frames.ndim != 2:
            raise DimMismatch(f"Feature frames must be 2D, got {self.frames.ndim}D")
        if self.frames.shape[0] == 0 or self.frames.shape[1] == 0:
            raise EmptyInput("Feature sequence has no frames")
        if not numpy.isfinite(self.frames).all():
            raise FormatError("Feature sequence has non-finite values")

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __len__(self) -> int:
        return self.frames.shape[0]


### Audio
@functools.lru_cache(maxsize=16)
def _read_wav(path: str) -> tuple[int, numpy.ndarray]:
    try:
        sample_rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError as e:
        raise IoError(f"Audio file not found: {path}") from e
    except OSError as e:
        raise IoError(f"Cannot read audio {path}: {e}") from e
    except ValueError as e:
        raise FormatError(f"{path} is not a readable WAV file: {e}") from e

    if data.dtype != numpy.int16:
        raise FormatError(f"{path}: expected 16-bit PCM, got {data.dtype}")
    if data.ndim != 1:
        raise FormatError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    data.setflags(write=False)
    return sample_rate, data


def standardize(samples: numpy.ndarray) -> tuple[numpy.ndarray, bool]:
    """Zero mean, unit variance. Near-constant input becomes all zeros and is
    flagged silent."""
    variance = samples.var()
    if variance < SILENCE_VARIANCE:
        return numpy.zeros_like(samples), True
    return (samples - samples.mean()) / numpy.sqrt(variance), False


def load_audio(path: str, start_s: float, end_s: float) -> AudioSegment:
    sample_rate, data = _read_wav(path)
    duration_s = len(data) / sample_rate
    if not 0 <= start_s < end_s:
        raise RangeError(f"Invalid audio span [{start_s}, {end_s}] for {path}")
    # Half a sample of slack for rounded timestamps
    if end_s > duration_s + 0.5 / sample_rate:
        raise RangeError(
            f"Audio span ends at {end_s}s but {path} lasts {duration_s:.3f}s"
        )

    first = int(round(start_s * sample_rate))
    last = min(int(round(end_s * sample_rate)), len(data))
    if last <= first:
        raise RangeError(f"Audio span [{start_s}, {end_s}] holds no samples")
    samples = data[first:last].astype(numpy.float64) / 32768.0
    samples, silent = standardize(samples)
    if silent:
        logger.warning(f"Silent audio span [{start_s}, {end_s}] in {path}")
    return AudioSegment(samples, sample_rate, (path, start_s, end_s), silent)


### Toy providers
def frame_signal(samples: numpy.ndarray, frame_len: int, hop_len: int) -> numpy.ndarray:
    """floor((N - L) / H) + 1 frames of length L"""
    windows = numpy.lib.stride_tricks.sliding_window_view(samples, frame_len)
    return windows[::hop_len]


def band_frequencies(sample_rate: int) -> numpy.ndarray:
    """Centers of 8 equal-width bands between 0 and Nyquist"""
    nyquist = sample_rate / 2
    return (numpy.arange(BAND_COUNT) + 0.5) * nyquist / BAND_COUNT


def goertzel_power(frames: numpy.ndarray, frequencies, sample_rate: int):
    """Per-frame power at each frequency, normalized by frame length"""
    n = numpy.arange(frames.shape[1])
    basis = numpy.exp(-2j * numpy.pi * numpy.outer(n, frequencies) / sample_rate)
    return numpy.abs(frames @ basis) ** 2 / frames.shape[1]


def toy_acoustic(
    seg: AudioSegment,
    frame_ms: float = 25,
    hop_ms: float = 10,
    dim: int = TOY_ACOUSTIC_FEATURES,
) -> FeatureSequence:
    """Per frame: log energy, zero-crossing rate, spectral centroid over 8
    bands (fraction of Nyquist) and the 8 band log-powers, zero-padded to
    `dim`."""
    if dim < TOY_ACOUSTIC_FEATURES:
        raise DimMismatch(f"ToyAcoustic needs dim >= 11, got {dim}")
    frame_len = int(round(seg.sample_rate * frame_ms / 1000))
    hop_len = max(1, int(round(seg.sample_rate * hop_ms / 1000)))
    if frame_len < 1 or len(seg.samples) < frame_len:
        raise TooShort(
            f"{len(seg.samples)} samples is shorter than one {frame_ms} ms frame"
        )

    frames = frame_signal(seg.samples, frame_len, hop_len)
    energy = numpy.log(numpy.mean(frames**2, axis=1) + LOG_FLOOR)
    signs = numpy.signbit(frames)
    zcr = numpy.mean(signs[:, 1:] != signs[:, :-1], axis=1)

    frequencies = band_frequencies(seg.sample_rate)
    power = goertzel_power(frames, frequencies, seg.sample_rate)
    total = power.sum(axis=1)
    centroid = numpy.divide(
        power @ frequencies,
        total,
        out=numpy.zeros_like(total),
        where=total > 0,
    ) / (seg.sample_rate / 2)
    band_log_power = numpy.log(power + LOG_FLOOR)

    features = numpy.zeros((frames.shape[0], dim))
    features[:, 0] = energy
    features[:, 1] = zcr
    features[:, 2] = centroid
    features[:, 3:TOY_ACOUSTIC_FEATURES] = band_log_power
    return FeatureSequence(features)


def toy_linguistic(tokens: list[Token], dim: int) -> FeatureSequence:
    """One pseudo-random unit vector per token, seeded by its norm"""
    if not tokens:
        raise EmptyInput("No tokens to encode")
    if dim < 8:
        raise DimMismatch(f"ToyLinguistic needs dim >= 8, got {dim}")
    frames = numpy.empty((len(tokens), dim))
    for i, token in enumerate(tokens):
        vector = numpy.random.default_rng(
            util.stable_hash64(token.norm)
        ).standard_normal(dim)
        frames[i] = vector / numpy.linalg.norm(vector)
    return FeatureSequence(frames)


### Feature files
def write_features(seq: FeatureSequence, path: str):
    header = numpy.array([seq.dim, len(seq)], dtype=FEATURE_HEADER_DTYPE)
    payload = numpy.ascontiguousarray(seq.frames, dtype=FEATURE_DTYPE)
    try:
        with open(path, "wb") as f:
            f.write(FEATURE_MAGIC)
            f.write(header.tobytes())
            f.write(payload.tobytes())
    except OSError as e:
        raise IoError(f"Cannot write features {path}: {e}")


def read_features(path: str) -> FeatureSequence:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoError(f"Cannot read features {path}: {e}")

    header_len = len(FEATURE_MAGIC) + 2 * FEATURE_HEADER_DTYPE.itemsize
    if len(raw) < header_len:
        raise FormatError(f"{path}: truncated feature header")
    if raw[: len(FEATURE_MAGIC)] != FEATURE_MAGIC:
        raise FormatError(f"{path}: not a feature file")
    dim, count = (
        int(v)
        for v in numpy.frombuffer(
            raw, dtype=FEATURE_HEADER_DTYPE, count=2, offset=len(FEATURE_MAGIC)
        )
    )
    if dim == 0 or count == 0:
        raise FormatError(f"{path}: empty feature sequence ({count} x {dim})")

    payload = raw[header_len:]
    if len(payload) % FEATURE_DTYPE.itemsize:
        raise FormatError(f"{path}: truncated feature payload")
    values = numpy.frombuffer(payload, dtype=FEATURE_DTYPE)
    if values.size != dim * count:
        raise DimMismatch(
            f"{path}: header says {count} x {dim} values, payload has {values.size}"
        )
    return FeatureSequence(values.reshape(count, dim).astype(FEATURE_DTYPE))


def feature_filename(example_id: str) -> str:
    return example_id.replace("/", "__") + FEATURE_SUFFIX


def confidence_features(example: EntailmentExample) -> FeatureSequence:
    """One frame per hypothesis word holding its ASR confidence. An empty
    hypothesis is a single zero-confidence frame."""
    if example.hyp_confidence is None:
        raise SchemaError(f"Example {example.id} has no hypothesis confidences")
    values = example.hyp_confidence or [0.0]
    return FeatureSequence(numpy.asarray(values, dtype=FEATURE_DTYPE).reshape(-1, 1))


def write_confidence_features(examples: list[EntailmentExample], out_dir: str) -> int:
    """Writes `confidence_features` of each example under `out_dir`, named so
    a `FileAcoustic` encoder with `dim` 1 reads them back"""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise IoError(f"Cannot create feature directory {out_dir}: {e}")
    for example in examples:
        write_features(
            confidence_features(example),
            os.path.join(out_dir, feature_filename(example.id)),
        )
    return len(examples)


def _file_features(spec: EncoderSpec, example: EntailmentExample) -> FeatureSequence:
    path = os.path.join(str(spec.params["dir"]), feature_filename(example.id))
    if not os.path.exists(path):
        raise EncoderResolutionError(f"No {spec.kind.value} features at {path}")
    seq = read_features(path)
    if seq.dim != spec.dim:
        raise DimMismatch(f"{path} has dim {seq.dim}, encoder expects {spec.dim}")
    return seq


def resolve_features(spec: EncoderSpec, example: EntailmentExample) -> FeatureSequence:
    """Feature sequence of one example under one encoder"""
    if spec.kind in (EncoderKind.FILE_ACOUSTIC, EncoderKind.FILE_LINGUISTIC):
        return _file_features(spec, example)

    if spec.kind == EncoderKind.TOY_ACOUSTIC:
        audio_ref = example.audio_ref
        try:
            seg = load_audio(audio_ref.path, audio_ref.start_s, audio_ref.end_s)
        except IoError as e:
            raise EncoderResolutionError(f"Example {example.id}: {e}") from e
        return toy_acoustic(
            seg,
            frame_ms=spec.params.get("frame_ms", 25),
            hop_ms=spec.params.get("hop_ms", 10),
            dim=spec.dim,
        )

    tokens = normalize(example.hyp_text) or [EMPTY_TOKEN]
    return toy_linguistic(tokens, spec.dim)
