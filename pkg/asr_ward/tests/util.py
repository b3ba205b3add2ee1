import json
import os

import numpy
import pandas
import scipy.io.wavfile

from asr_ward import asr_ward, encoders, ontology, simulate
from asr_ward.manifests import manifest, simulated_manifest, task_manifest
from asr_ward.models import (
    Conversation,
    DatasetManifest,
    EntailmentExample,
    PipelineConfig,
    Utterance,
)
from asr_ward.processors import (
    balance_processor,
    duration_filter_processor,
    label_processor,
    simulate_processor,
    split_processor,
)


def new_label_processor(seed=0, data=None, lexicon=None):
    if data is None:
        data = pandas.DataFrame()
    if lexicon is None:
        lexicon = ontology.Lexicon()
    return label_processor.LabelProcessor(seed, data, lexicon=lexicon, workers=2)


def new_duration_filter_processor(seed=0, data=None, min_s=1.0, max_s=30.0):
    if data is None:
        data = pandas.DataFrame(columns=manifest.EXAMPLE_COLUMNS)
    return duration_filter_processor.DurationFilterProcessor(
        seed, data, min_s=min_s, max_s=max_s
    )


def new_balance_processor(seed=0, data=None, by=manifest.LABEL_FIELD, within=None):
    if data is None:
        data = pandas.DataFrame(columns=manifest.EXAMPLE_COLUMNS)
    return balance_processor.BalanceProcessor(seed, data, by=by, within=within)


def new_split_processor(seed=0, data=None, by=None):
    if data is None:
        data = pandas.DataFrame(columns=manifest.EXAMPLE_COLUMNS)
    return split_processor.SplitProcessor(seed, data, by=by)


def new_simulate_processor(seed=0, data=None, confusion=None):
    if data is None:
        data = pandas.DataFrame(columns=manifest.EXAMPLE_COLUMNS)
    if confusion is None:
        confusion = simulate.build_confusion(["placeholder"], seed=seed)
    return simulate_processor.SimulateProcessor(seed, data, confusion=confusion)


def new_task_manifest(
    seed=0,
    data=None,
    task=manifest.ALL_ERRORS_TASK,
    split="train",
    lexicon_hash="abc",
    out_dir=".",
):
    if data is None:
        data = pandas.DataFrame(columns=manifest.EXAMPLE_COLUMNS)
    return task_manifest.TaskManifest(
        seed,
        data,
        task=task,
        split=split,
        lexicon_hash=lexicon_hash,
        out_dir=out_dir,
    )


def new_simulated_manifest(seed=0, data=None, path="test_simulated.jsonl"):
    if data is None:
        data = pandas.DataFrame(columns=manifest.EXAMPLE_COLUMNS)
    return simulated_manifest.SimulatedManifest(
        seed, data, lexicon_hash="abc", path=path
    )


def new_example(
    id="c1/0000",
    ref_text="keep her on the symbicort",
    hyp_text=None,
    label=None,
    medical_label=0,
    start_s=0.0,
    end_s=2.0,
    audio_path="c1.wav",
    term_hits=None,
    hyp_confidence=None,
):
    if hyp_text is None:
        hyp_text = ref_text
    if label is None:
        label = int(hyp_text != ref_text)
    return EntailmentExample(
        id=id,
        audio_ref={"path": audio_path, "start_s": start_s, "end_s": end_s},
        hyp_text=hyp_text,
        label=label,
        medical_label=medical_label,
        ref_text=ref_text,
        term_hits=term_hits or [],
        hyp_confidence=hyp_confidence,
    )


def new_manifest(examples, split="train", seed=0, task=None):
    return DatasetManifest(
        split=split, seed=seed, lexicon_hash="abc", task=task, examples=examples
    )


def examples_frame(examples) -> pandas.DataFrame:
    return manifest.examples_to_frame(examples)


def write_wav(path, samples, sample_rate=8000):
    """Writes float samples in [-1, 1] as 16-bit PCM mono"""
    pcm = numpy.clip(numpy.round(numpy.asarray(samples) * 32767), -32768, 32767)
    scipy.io.wavfile.write(path, sample_rate, pcm.astype(numpy.int16))


def tone(frequency, duration_s, sample_rate=8000, amplitude=0.5, seed=0):
    t = numpy.arange(int(duration_s * sample_rate)) / sample_rate
    noise = numpy.random.default_rng(seed).normal(0, 0.01, len(t))
    return amplitude * numpy.sin(2 * numpy.pi * frequency * t) + noise


def write_conversation(path, conversation_id, utterances, audio_path=None):
    conversation = {"conversation_id": conversation_id, "utterances": utterances}
    if audio_path is not None:
        conversation["audio_path"] = audio_path
    with open(path, "w") as f:
        json.dump(conversation, f)


def write_clustered_features(
    feature_dir, examples, d_a=4, d_l=8, separation=3.0, seed=0
):
    """Feature files whose pooled vectors form one Gaussian cluster per label"""
    rng = numpy.random.default_rng(seed)
    acoustic_dir = os.path.join(feature_dir, "acoustic")
    linguistic_dir = os.path.join(feature_dir, "linguistic")
    os.makedirs(acoustic_dir, exist_ok=True)
    os.makedirs(linguistic_dir, exist_ok=True)
    for example in examples:
        sign = 1.0 if example.label == 1 else -1.0
        frames = rng.integers(1, 5)
        acoustic = rng.normal(sign * separation, 1.0, size=(frames, d_a))
        linguistic = rng.normal(sign * separation, 1.0, size=(frames, d_l))
        filename = encoders.feature_filename(example.id)
        encoders.write_features(
            encoders.FeatureSequence(acoustic.astype(numpy.float32)),
            os.path.join(acoustic_dir, filename),
        )
        encoders.write_features(
            encoders.FeatureSequence(linguistic.astype(numpy.float32)),
            os.path.join(linguistic_dir, filename),
        )
    return acoustic_dir, linguistic_dir


def new_conversation_pair(
    conversation_id, text_pairs, seconds=2.0, audio_path=None, hyp_confidence=None
):
    """Reference and hypothesis conversations with one utterance per text pair.
    `hyp_confidence` holds one list of word confidences per hypothesis text."""
    sides = []
    for side in (0, 1):
        utterances = [
            Utterance(
                speaker="doctor",
                start_s=i * seconds,
                end_s=(i + 1) * seconds,
                text=texts[side],
                confidence=hyp_confidence[i] if side and hyp_confidence else None,
            )
            for i, texts in enumerate(text_pairs)
        ]
        sides.append(
            Conversation(
                conversation_id=conversation_id,
                utterances=utterances,
                audio_path=audio_path or f"{conversation_id}.wav",
            )
        )
    return sides[0], sides[1]


def aligned_records(conversation_id, text_pairs, seconds=2.0, hyp_confidence=None):
    ref, hyp = new_conversation_pair(
        conversation_id, text_pairs, seconds, hyp_confidence=hyp_confidence
    )
    return asr_ward.align_conversation(ref, hyp, PipelineConfig())


def aligned_frame(conversations, hyp_confidence=None) -> pandas.DataFrame:
    """Aligned pair records for `{conversation_id: [(ref_text, hyp_text), ...]}`,
    with optional `{conversation_id: [[confidence, ...], ...]}`"""
    hyp_confidence = hyp_confidence or {}
    records = []
    for conversation_id, text_pairs in conversations.items():
        records.extend(
            aligned_records(
                conversation_id,
                text_pairs,
                hyp_confidence=hyp_confidence.get(conversation_id),
            )
        )
    return pandas.DataFrame(records)
