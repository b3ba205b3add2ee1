"""Audio/text entailment head.

Both modalities are mean-pooled, linearly projected, concatenated (acoustic
first) and scored by a single sigmoid unit. Encoders are frozen: only the
head parameters are trained.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import json
import logging
import math

import numpy
import scipy.special

from asr_ward import encoders, metrics, util
from asr_ward.errors import DimMismatch, EmptyInput, EmptySequence, IoError, SchemaError
from asr_ward.models import (
    DatasetManifest,
    Dims,
    EncoderSpec,
    EntailmentExample,
    Optimizer,
    TrainConfig,
)

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


CHECKPOINT_FORMAT = "awhead-1"
PROB_CLAMP = 1e-7
PARAM_FIELDS = ("W_a", "b_a", "W_l", "b_l", "W_e", "b_e")


@dataclass
class HeadParams:
    W_a: numpy.ndarray
    b_a: numpy.ndarray
    W_l: numpy.ndarray
    b_l: numpy.ndarray
    W_e: numpy.ndarray
    b_e: float

    @property
    def dims(self) -> Dims:
        return Dims(
            d_a=self.W_a.shape[1], d_l=self.W_l.shape[1], d_proj=self.W_a.shape[0]
        )

    @classmethod
    def zeros(cls, dims: Dims) -> "HeadParams":
        return cls(
            W_a=numpy.zeros((dims.d_proj, dims.d_a)),
            b_a=numpy.zeros(dims.d_proj),
            W_l=numpy.zeros((dims.d_proj, dims.d_l)),
            b_l=numpy.zeros(dims.d_proj),
            W_e=numpy.zeros(2 * dims.d_proj),
            b_e=0.0,
        )

    @classmethod
    def init(cls, dims: Dims, rng: numpy.random.Generator) -> "HeadParams":
        """Uniform in ±1/sqrt(fan_in) for each layer"""

        def uniform(fan_in, shape):
            bound = 1 / math.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        return cls(
            W_a=uniform(dims.d_a, (dims.d_proj, dims.d_a)),
            b_a=uniform(dims.d_a, dims.d_proj),
            W_l=uniform(dims.d_l, (dims.d_proj, dims.d_l)),
            b_l=uniform(dims.d_l, dims.d_proj),
            W_e=uniform(2 * dims.d_proj, 2 * dims.d_proj),
            b_e=float(uniform(2 * dims.d_proj, ())),
        )

    def to_vector(self) -> numpy.ndarray:
        return numpy.concatenate(
            [numpy.ravel(getattr(self, name)) for name in PARAM_FIELDS]
        )

    @classmethod
    def from_vector(cls, dims: Dims, vector: numpy.ndarray) -> "HeadParams":
        shapes = {
            "W_a": (dims.d_proj, dims.d_a),
            "b_a": (dims.d_proj,),
            "W_l": (dims.d_proj, dims.d_l),
            "b_l": (dims.d_proj,),
            "W_e": (2 * dims.d_proj,),
            "b_e": (),
        }
        fields = {}
        offset = 0
        for name in PARAM_FIELDS:
            size = math.prod(shapes[name])
            fields[name] = vector[offset : offset + size].reshape(shapes[name]).copy()
            offset += size
        fields["b_e"] = float(fields["b_e"])
        return cls(**fields)


@dataclass
class Batch:
    acoustic: numpy.ndarray
    linguistic: numpy.ndarray
    labels: numpy.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, positions) -> "Batch":
        return Batch(
            self.acoustic[positions], self.linguistic[positions], self.labels[positions]
        )


def mean_pool(seq: encoders.FeatureSequence) -> numpy.ndarray:
    if len(seq.frames) == 0:
        raise EmptySequence("Cannot pool an empty feature sequence")
    return seq.frames.mean(axis=0, dtype=numpy.float64)


def _check_dims(acoustic: numpy.ndarray, linguistic: numpy.ndarray, p: HeadParams):
    if acoustic.shape[-1] != p.W_a.shape[1]:
        raise DimMismatch(
            f"Acoustic features have dim {acoustic.shape[-1]}, "
            f"head expects {p.W_a.shape[1]}"
        )
    if linguistic.shape[-1] != p.W_l.shape[1]:
        raise DimMismatch(
            f"Linguistic features have dim {linguistic.shape[-1]}, "
            f"head expects {p.W_l.shape[1]}"
        )


def _context(acoustic: numpy.ndarray, linguistic: numpy.ndarray, p: HeadParams):
    a = acoustic @ p.W_a.T + p.b_a
    l = linguistic @ p.W_l.T + p.b_l
    return numpy.concatenate([a, l], axis=-1)


def forward_pooled(
    acoustic: numpy.ndarray, linguistic: numpy.ndarray, p: HeadParams
) -> numpy.ndarray:
    """Entailment scores for rows of pooled features"""
    _check_dims(acoustic, linguistic, p)
    return scipy.special.expit(_context(acoustic, linguistic, p) @ p.W_e + p.b_e)


def forward(
    acoustic: encoders.FeatureSequence,
    linguistic: encoders.FeatureSequence,
    p: HeadParams,
) -> float:
    return float(forward_pooled(mean_pool(acoustic), mean_pool(linguistic), p))


def loss(e, y):
    """Binary cross-entropy, with e clamped away from 0 and 1"""
    e = numpy.clip(e, PROB_CLAMP, 1 - PROB_CLAMP)
    return -(y * numpy.log(e) + (1 - y) * numpy.log(1 - e))


def batch_loss(batch: Batch, p: HeadParams) -> float:
    scores = forward_pooled(batch.acoustic, batch.linguistic, p)
    return float(numpy.mean(loss(scores, batch.labels)))


def gradients(batch: Batch, p: HeadParams) -> HeadParams:
    """Mean loss gradient over the batch, shaped like the parameters"""
    if not len(batch):
        raise EmptyInput("Cannot take gradients of an empty batch")
    _check_dims(batch.acoustic, batch.linguistic, p)
    d_proj = p.W_a.shape[0]
    context = _context(batch.acoustic, batch.linguistic, p)
    delta = scipy.special.expit(context @ p.W_e + p.b_e) - batch.labels
    n = len(batch)

    mean_delta = float(delta.mean())
    w_e_a, w_e_l = p.W_e[:d_proj], p.W_e[d_proj:]
    return HeadParams(
        W_a=numpy.outer(w_e_a, delta @ batch.acoustic / n),
        b_a=w_e_a * mean_delta,
        W_l=numpy.outer(w_e_l, delta @ batch.linguistic / n),
        b_l=w_e_l * mean_delta,
        W_e=delta @ context / n,
        b_e=mean_delta,
    )


### Optimizers over flattened parameters
class SGD:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: numpy.ndarray, grads: numpy.ndarray) -> numpy.ndarray:
        return params - self.learning_rate * grads


class Adam:
    def __init__(self, learning_rate: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: numpy.ndarray, grads: numpy.ndarray) -> numpy.ndarray:
        if self.m is None:
            self.m = numpy.zeros_like(params)
            self.v = numpy.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1 - self.beta2) * grads**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.learning_rate * m_hat / (numpy.sqrt(v_hat) + self.eps)


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == Optimizer.SGD:
        return SGD(cfg.learning_rate)
    return Adam(cfg.learning_rate, cfg.betas, cfg.eps)


### Manifest level
def _pooled_example(example, acoustic_spec, linguistic_spec):
    return (
        mean_pool(encoders.resolve_features(acoustic_spec, example)),
        mean_pool(encoders.resolve_features(linguistic_spec, example)),
    )


def pool_examples(
    examples: list[EntailmentExample],
    encoder_specs: tuple[EncoderSpec, EncoderSpec],
) -> tuple[numpy.ndarray, numpy.ndarray]:
    """Pooled acoustic and linguistic features, one row per example.
    Features are loaded in parallel, rows keep example order."""
    acoustic_spec, linguistic_spec = encoder_specs
    if not examples:
        return (
            numpy.zeros((0, acoustic_spec.dim)),
            numpy.zeros((0, linguistic_spec.dim)),
        )
    with ThreadPoolExecutor(max_workers=util.get_worker_count()) as executor:
        pooled = list(
            executor.map(
                _pooled_example,
                examples,
                [acoustic_spec] * len(examples),
                [linguistic_spec] * len(examples),
            )
        )
    return (
        numpy.stack([a for a, _ in pooled]),
        numpy.stack([l for _, l in pooled]),
    )


def example_labels(examples: list[EntailmentExample], target: str) -> numpy.ndarray:
    labels = []
    for example in examples:
        value = getattr(example, target)
        if value is None:
            raise SchemaError(f"Example {example.id} has no {target}")
        labels.append(value)
    return numpy.array(labels, dtype=numpy.float64)


def make_batch(
    manifest: DatasetManifest,
    encoder_specs: tuple[EncoderSpec, EncoderSpec],
    target: str = "label",
) -> Batch:
    acoustic, linguistic = pool_examples(manifest.examples, encoder_specs)
    return Batch(acoustic, linguistic, example_labels(manifest.examples, target))


def _confusion(scores: numpy.ndarray, labels: numpy.ndarray, threshold: float):
    predicted = scores >= threshold
    actual = labels == 1
    return metrics.Confusion(
        tp=int(numpy.sum(predicted & actual)),
        fp=int(numpy.sum(predicted & ~actual)),
        tn=int(numpy.sum(~predicted & ~actual)),
        fn=int(numpy.sum(~predicted & actual)),
    )


def evaluate_batch(batch: Batch, p: HeadParams, threshold: float = 0.5) -> dict:
    scores = forward_pooled(batch.acoustic, batch.linguistic, p)
    precision, recall, f1, cer = metrics.classification_metrics(
        _confusion(scores, batch.labels, threshold)
    )
    return {
        "loss": float(numpy.mean(loss(scores, batch.labels))),
        "precision": float(precision),
        "recall": float(recall),
        "f1": float(f1),
        "cer": float(cer),
    }


def train(
    manifest: DatasetManifest,
    encoder_specs: tuple[EncoderSpec, EncoderSpec],
    cfg: TrainConfig,
    d_proj: int = 64,
    val_manifest: DatasetManifest | None = None,
    init: HeadParams | None = None,
    target: str = "label",
) -> tuple[HeadParams, list[dict]]:
    """Train the head with seeded initialization and per-epoch shuffling.

    History has one entry per epoch with the full training loss after the
    epoch and, when a non-empty validation manifest is given, its metrics.
    """
    if not manifest.examples:
        raise EmptyInput(f"Manifest {manifest.split} has no examples")

    acoustic_spec, linguistic_spec = encoder_specs
    dims = Dims(d_a=acoustic_spec.dim, d_l=linguistic_spec.dim, d_proj=d_proj)
    train_batch = make_batch(manifest, encoder_specs, target)
    val_batch = None
    if val_manifest is not None and val_manifest.examples:
        val_batch = make_batch(val_manifest, encoder_specs, target)

    rng = numpy.random.default_rng(cfg.seed)
    if init is not None:
        if init.dims != dims:
            raise DimMismatch(f"Initial head has dims {init.dims}, expected {dims}")
        params = init
    else:
        params = HeadParams.init(dims, rng)

    optimizer = make_optimizer(cfg)
    vector = params.to_vector()
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_batch))
        for start in range(0, len(order), cfg.batch_size):
            batch = train_batch.subset(order[start : start + cfg.batch_size])
            grads = gradients(batch, HeadParams.from_vector(dims, vector))
            vector = optimizer.step(vector, grads.to_vector())

        params = HeadParams.from_vector(dims, vector)
        entry = {"epoch": epoch, "train_loss": batch_loss(train_batch, params)}
        if val_batch is not None:
            entry.update(
                {f"val_{k}": v for k, v in evaluate_batch(val_batch, params).items()}
            )
        history.append(entry)
        logger.info(
            f"Epoch {epoch}/{cfg.epochs}: train loss {entry['train_loss']:.6f}"
            + (f", val CER {entry['val_cer']:.2f}" if val_batch is not None else "")
        )
    return params, history


@dataclass(frozen=True)
class Prediction:
    id: str
    score: float
    label: int


def predict(
    manifest: DatasetManifest,
    encoder_specs: tuple[EncoderSpec, EncoderSpec],
    p: HeadParams,
    threshold: float = 0.5,
) -> list[Prediction]:
    """An example is flagged as an error when its score is >= threshold"""
    acoustic, linguistic = pool_examples(manifest.examples, encoder_specs)
    if not manifest.examples:
        return []
    scores = forward_pooled(acoustic, linguistic, p)
    return [
        Prediction(example.id, float(score), int(score >= threshold))
        for example, score in zip(manifest.examples, scores)
    ]


### Checkpoints
def save_params(p: HeadParams, path: str, seed: int = 0):
    dims = p.dims
    checkpoint = {
        "dims": {"d_a": dims.d_a, "d_l": dims.d_l, "d_proj": dims.d_proj},
        "W_a": p.W_a.tolist(),
        "b_a": p.b_a.tolist(),
        "W_l": p.W_l.tolist(),
        "b_l": p.b_l.tolist(),
        "W_e": p.W_e.tolist(),
        "b_e": float(p.b_e),
        "seed": seed,
        "format": CHECKPOINT_FORMAT,
    }
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(checkpoint, f)
            f.write("\n")
    except OSError as e:
        raise IoError(f"Cannot write checkpoint {path}: {e}")


def load_params(path: str, expected_dims: Dims | None = None) -> HeadParams:
    try:
        with open(path, encoding="utf-8") as f:
            checkpoint = json.load(f)
    except OSError as e:
        raise IoError(f"Cannot read checkpoint {path}: {e}")
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise SchemaError(f"Checkpoint {path} is not valid JSON: {e}")

    if (
        not isinstance(checkpoint, dict)
        or checkpoint.get("format") != CHECKPOINT_FORMAT
    ):
        raise SchemaError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    missing = [k for k in ("dims",) + PARAM_FIELDS if k not in checkpoint]
    if missing:
        raise SchemaError(f"Checkpoint {path} is missing {missing}")

    try:
        dims = Dims.model_validate(checkpoint["dims"])
        params = HeadParams(
            W_a=numpy.array(checkpoint["W_a"], dtype=numpy.float64),
            b_a=numpy.array(checkpoint["b_a"], dtype=numpy.float64),
            W_l=numpy.array(checkpoint["W_l"], dtype=numpy.float64),
            b_l=numpy.array(checkpoint["b_l"], dtype=numpy.float64),
            W_e=numpy.array(checkpoint["W_e"], dtype=numpy.float64),
            b_e=float(checkpoint["b_e"]),
        )
    except (ValueError, TypeError) as e:
        raise SchemaError(f"Checkpoint {path} has malformed parameters: {e}")

    expected_shapes = {
        "W_a": (dims.d_proj, dims.d_a),
        "b_a": (dims.d_proj,),
        "W_l": (dims.d_proj, dims.d_l),
        "b_l": (dims.d_proj,),
        "W_e": (2 * dims.d_proj,),
    }
    for name, shape in expected_shapes.items():
        if getattr(params, name).shape != shape:
            raise SchemaError(
                f"Checkpoint {path}: {name} has shape "
                f"{getattr(params, name).shape}, dims say {shape}"
            )
    if not all(numpy.isfinite(params.to_vector())):
        raise SchemaError(f"Checkpoint {path} has non-finite parameters")

    if expected_dims is not None and (
        dims.d_a != expected_dims.d_a
        or dims.d_l != expected_dims.d_l
        or dims.d_proj != expected_dims.d_proj
    ):
        raise DimMismatch(
            f"Checkpoint {path} has dims {dims}, config expects {expected_dims}"
        )
    return params
