"""asr-ward: detect ASR errors by audio/text entailment.

Pipeline: align -> dataset -> (simulate) -> train -> evaluate, plus `score`
for transcript-level WER/BLEU/medical term metrics and `confidence-features`
to train on ASR word confidences in place of audio.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import json
import logging
import os
import sys

import pydantic
from jinja2 import Environment, FileSystemLoader

from asr_ward import alignment, encoders, entail, metrics, simulate, util
from asr_ward.errors import AsrWardError, IoError, SchemaError
from asr_ward.loader import loader, read_jsonl
from asr_ward.manifests import manifest, simulated_manifest, task_manifest
from asr_ward.models import Conversation, PipelineConfig
from asr_ward.processors import (
    balance_processor,
    duration_filter_processor,
    label_processor,
    simulate_processor,
    split_processor,
)
from asr_ward.settings import asr_ward_settings
from asr_ward.textnorm import normalize, segment_utterances

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


EXIT_INPUT = 2
EXIT_INTERNAL = 4


def _write_bytes(path: str, content: bytes):
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            f.write(content)
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}")


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _companion_path(path: str, suffix: str) -> str:
    """`report.json` -> `report.txt`, `model.json` -> `model.metrics.json`"""
    stem, ext = os.path.splitext(path)
    return (stem if ext == ".json" else path) + suffix


### align
def word_confidences(conversation: Conversation) -> list[float] | None:
    """Confidence per whitespace word of the whole conversation, or None
    unless every utterance carries them"""
    confidences = []
    for utterance in conversation.utterances:
        if utterance.confidence is None:
            return None
        confidences.extend(utterance.confidence)
    return confidences


def align_conversation(
    ref: Conversation, hyp: Conversation, config: PipelineConfig
) -> list[dict]:
    ref_stream = segment_utterances(ref.utterances)
    hyp_stream = segment_utterances(hyp.utterances)
    pairs = alignment.align_transcripts(
        ref_stream.tokens,
        hyp_stream.tokens,
        ref_stream.segments,
        hyp_stream.segments,
        config.align,
    )
    confidences = word_confidences(hyp)

    records = []
    ref_offset = 0
    for index, pair in enumerate(pairs):
        hyp_offset = next(
            (op.hyp_index for op in pair.trace if op.hyp_index is not None), 0
        )
        record = alignment.pair_to_record(
            pair, ref.conversation_id, index, ref.audio_path, ref_offset, hyp_offset
        )
        if confidences is not None:
            record[manifest.HYP_CONFIDENCE_FIELD] = [
                confidences[token.source_index] for token in pair.hyp_segment.tokens
            ]
        records.append(record)
        ref_offset += len(pair.ref_segment.tokens)
    return records


def cmd_align(args, config: PipelineConfig) -> int:
    refs = loader.load_conversations(args.ref)
    hyps = loader.load_conversations(args.hyp)
    for cid in sorted(set(refs) ^ set(hyps)):
        side = "reference" if cid in refs else "hypothesis"
        logger.warning(f"Conversation {cid} only has a {side} transcript, skipping")

    conversation_ids = sorted(set(refs) & set(hyps))
    with ThreadPoolExecutor(max_workers=util.get_worker_count()) as executor:
        aligned = list(
            executor.map(
                lambda cid: align_conversation(refs[cid], hyps[cid], config),
                conversation_ids,
            )
        )

    lines = [
        json.dumps(record, ensure_ascii=False) + "\n"
        for records in aligned
        for record in records
    ]
    _write_bytes(args.out, "".join(lines).encode("utf-8"))
    logger.info(
        f"Aligned {len(conversation_ids)} conversations into {len(lines)} pairs"
    )
    return 0


### dataset
def build_task_data(labelled, task: str, config: PipelineConfig):
    """Balance, split stratified on the task label, then balance each split"""
    target = manifest.target_field(task)
    data = labelled
    if task == manifest.MEDICAL_ERRORS_TASK:
        data = data[data[manifest.TERM_HITS_FIELD].map(len) > 0].reset_index(drop=True)

    balancer = balance_processor.BalanceProcessor(
        seed=util.derive_seed(config.seed, f"balance:{task}"), data=data, by=target
    )
    balancer.process()
    splitter = split_processor.SplitProcessor(
        seed=util.derive_seed(config.seed, f"split:{task}"),
        data=balancer.data,
        by=target,
    )
    splitter.process()
    split_balancer = balance_processor.BalanceProcessor(
        seed=util.derive_seed(config.seed, f"balance-splits:{task}"),
        data=splitter.data,
        by=target,
        within=manifest.SPLIT_FIELD,
    )
    split_balancer.process()
    return split_balancer.data


def cmd_dataset(args, config: PipelineConfig) -> int:
    lexicon_path = args.lexicon or config.lexicon_path
    lexicon = loader.get_lexicon(lexicon_path)
    lexicon_hash = loader.get_lexicon_hash(lexicon_path)

    labeller = label_processor.LabelProcessor(
        seed=config.seed, data=loader.load_aligned_pairs(args.aligned), lexicon=lexicon
    )
    labeller.process()
    min_s, max_s = config.duration_bounds
    duration_filter = duration_filter_processor.DurationFilterProcessor(
        seed=config.seed, data=labeller.data, min_s=min_s, max_s=max_s
    )
    duration_filter.process()

    for task in manifest.TASK_TARGETS:
        task_data = build_task_data(duration_filter.data, task, config)
        for split in manifest.SPLITS:
            exporter = task_manifest.TaskManifest(
                seed=config.seed,
                data=task_data,
                task=task,
                split=split,
                lexicon_hash=lexicon_hash,
                out_dir=args.out_dir,
            )
            exporter.process()
            exporter.export()
    return 0


### simulate
def manifest_vocab(dataset_manifest) -> list[str]:
    vocab = set()
    for example in dataset_manifest.examples:
        for text in (example.ref_text, example.hyp_text):
            vocab.update(token.norm for token in normalize(text))
    return sorted(vocab)


def cmd_simulate(args, config: PipelineConfig) -> int:
    test = manifest.read_manifest(args.manifest)
    vocab = loader.load_vocab(args.vocab) if args.vocab else manifest_vocab(test)
    confusion = simulate.build_confusion(vocab, config.max_edit, config.seed)

    simulator = simulate_processor.SimulateProcessor(
        seed=config.seed,
        data=manifest.examples_to_frame(test.examples),
        confusion=confusion,
        align_params=config.align,
    )
    simulator.process()
    exporter = simulated_manifest.SimulatedManifest(
        seed=config.seed,
        data=simulator.data,
        task=test.task,
        lexicon_hash=test.lexicon_hash,
        path=args.out,
    )
    exporter.process()
    exporter.export()
    return 0


### confidence-features
def cmd_confidence_features(args, config: PipelineConfig) -> int:
    count = 0
    for path in args.manifests:
        dataset_manifest = manifest.read_manifest(path)
        count += encoders.write_confidence_features(
            dataset_manifest.examples, args.out_dir
        )
    logger.info(f"Wrote confidence features of {count} examples to {args.out_dir}")
    return 0


### train
def _encoder_specs(config: PipelineConfig):
    return config.acoustic, config.linguistic


def cmd_train(args, config: PipelineConfig) -> int:
    train_path = os.path.join(args.manifest_dir, "train.jsonl")
    val_path = os.path.join(args.manifest_dir, "val.jsonl")
    train_manifest = manifest.read_manifest(train_path)
    val_manifest = None
    if os.path.exists(val_path):
        val_manifest = manifest.read_manifest(val_path)

    init = None
    if args.init:
        init = entail.load_params(args.init, config.dims)

    params, history = entail.train(
        train_manifest,
        _encoder_specs(config),
        config.train,
        d_proj=config.d_proj,
        val_manifest=val_manifest,
        init=init,
        target=manifest.target_field(train_manifest.task),
    )
    entail.save_params(params, args.out, seed=config.train.seed)
    _write_bytes(
        _companion_path(args.out, ".metrics.json"),
        _dump_json(
            {
                "task": train_manifest.task,
                "train_config": config.train.model_dump(mode="json"),
                "history": history,
            }
        ),
    )
    return 0


### evaluate
def cmd_evaluate(args, config: PipelineConfig) -> int:
    dataset_manifest = manifest.read_manifest(args.manifest)
    params = entail.load_params(args.checkpoint, config.dims)
    lexicon = loader.get_lexicon(args.lexicon or config.lexicon_path)

    predictions = entail.predict(
        dataset_manifest, _encoder_specs(config), params, config.threshold
    )
    report = metrics.breakdown(
        predictions,
        dataset_manifest,
        lexicon,
        target=manifest.target_field(dataset_manifest.task),
    )
    _write_bytes(args.report_out, metrics.render_report(report, "json"))
    _write_bytes(
        _companion_path(args.report_out, ".txt"),
        metrics.render_report(
            report, "text", config.report_top_k, config.report_cutoff, config.seed
        ),
    )
    if report.overall:
        logger.info(
            f"CER {report.overall['cer']:.2f} "
            f"on {report.counts['examples']} examples"
        )
    return 0


### score
def cmd_score(args, config: PipelineConfig) -> int:
    lexicon = loader.get_lexicon(args.lexicon or config.lexicon_path)
    pairs = [
        alignment.pair_from_record(record)
        for record in read_jsonl(args.aligned, "aligned pairs")
    ]
    scores = metrics.score_transcripts(pairs, lexicon)
    _write_bytes(args.out, _dump_json(scores))

    environment = Environment(
        loader=FileSystemLoader(metrics.TEMPLATE_DIR_PATH),
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    content = environment.get_template("scores.txt.j2").render(scores=scores)
    _write_bytes(_companion_path(args.out, ".txt"), content.encode("utf-8"))
    return 0


### configuration
def resolve_config(args) -> PipelineConfig:
    """Config file values, overridden by any flags given"""
    config = loader.get_pipeline_config(args.config)
    values = config.model_dump(mode="json")
    if args.seed is not None:
        values["seed"] = args.seed
        values["train"]["seed"] = args.seed
    for flag, key in (
        ("threshold", "threshold"),
        ("d_proj", "d_proj"),
        ("max_edit", "max_edit"),
    ):
        if getattr(args, flag, None) is not None:
            values[key] = getattr(args, flag)
    for flag, key in (
        ("learning_rate", "learning_rate"),
        ("epochs", "epochs"),
        ("batch_size", "batch_size"),
        ("optimizer", "optimizer"),
    ):
        if getattr(args, flag, None) is not None:
            values["train"][key] = getattr(args, flag)
    try:
        return PipelineConfig.model_validate(values)
    except pydantic.ValidationError as e:
        raise SchemaError(f"Invalid configuration: {e}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Pipeline config JSON file")
    common.add_argument("--seed", type=int, help="Seed for sampling and training")

    parser = argparse.ArgumentParser(
        prog="asr-ward", description="Detect ASR errors by audio/text entailment"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    align = subparsers.add_parser(
        "align", parents=[common], help="Align reference and hypothesis transcripts"
    )
    align.add_argument("ref", help="Reference transcript JSON file or directory")
    align.add_argument("hyp", help="Hypothesis transcript JSON file or directory")
    align.add_argument("--out", required=True, help="Aligned pairs JSON lines file")
    align.set_defaults(func=cmd_align)

    dataset = subparsers.add_parser(
        "dataset", parents=[common], help="Build labelled train/val/test manifests"
    )
    dataset.add_argument("aligned", help="Aligned pairs file from `align`")
    dataset.add_argument("--lexicon", help="Medical term lexicon TSV")
    dataset.add_argument("--out-dir", required=True)
    dataset.set_defaults(func=cmd_dataset)

    sim = subparsers.add_parser(
        "simulate", parents=[common], help="Resample errors in a test manifest"
    )
    sim.add_argument("manifest", help="Test manifest")
    sim.add_argument(
        "--vocab",
        help="Confusion vocabulary, one word per line (default: manifest words)",
    )
    sim.add_argument("--out", required=True)
    sim.add_argument("--max-edit", dest="max_edit", type=int)
    sim.set_defaults(func=cmd_simulate)

    confidence = subparsers.add_parser(
        "confidence-features",
        parents=[common],
        help="Write ASR word confidences as FileAcoustic features",
    )
    confidence.add_argument("manifests", nargs="+", help="Dataset manifests")
    confidence.add_argument("--out-dir", dest="out_dir", required=True)
    confidence.set_defaults(func=cmd_confidence_features)

    train = subparsers.add_parser(
        "train", parents=[common], help="Train the entailment head"
    )
    train.add_argument(
        "manifest_dir", help="Directory with train.jsonl (and val.jsonl)"
    )
    train.add_argument("--out", required=True, help="Checkpoint file")
    train.add_argument("--init", help="Checkpoint to continue training from")
    train.add_argument("--lr", dest="learning_rate", type=float)
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", dest="batch_size", type=int)
    train.add_argument("--optimizer", choices=["SGD", "Adam"])
    train.add_argument("--d-proj", dest="d_proj", type=int)
    train.set_defaults(func=cmd_train)

    evaluate = subparsers.add_parser(
        "evaluate", parents=[common], help="Evaluate a checkpoint on a manifest"
    )
    evaluate.add_argument("manifest")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--lexicon", help="Medical term lexicon TSV")
    evaluate.add_argument("--report-out", dest="report_out", required=True)
    evaluate.add_argument("--threshold", type=float)
    evaluate.add_argument("--d-proj", dest="d_proj", type=int)
    evaluate.set_defaults(func=cmd_evaluate)

    score = subparsers.add_parser(
        "score", parents=[common], help="WER, BLEU and medical term scores"
    )
    score.add_argument("aligned", help="Aligned pairs file from `align`")
    score.add_argument("--lexicon", help="Medical term lexicon TSV")
    score.add_argument("--out", required=True)
    score.set_defaults(func=cmd_score)

    return parser


def main(arg_list: list[str] | None = None) -> int:
    args = build_parser().parse_args(arg_list)
    logging.getLogger().setLevel(asr_ward_settings.log_level)

    try:
        config = resolve_config(args)
        return args.func(args, config)
    except AsrWardError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except (pydantic.ValidationError, json.JSONDecodeError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except Exception:
        logger.exception(f"Unexpected failure in `{args.command}`")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
