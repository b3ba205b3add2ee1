from collections import Counter
from dataclasses import dataclass
import logging

import numpy

from asr_ward import util
from asr_ward.errors import EmptyClass, TooFewExamples
from asr_ward.manifests import manifest
from asr_ward.models import EntailmentExample
from asr_ward.processors import processor

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


# Split shares in tenths
SPLIT_TENTHS = {"train": 8, "val": 1, "test": 1}
MIN_EXAMPLES = 10
MIN_CONVERSATIONS = 3


def split_targets(count: int) -> dict[str, int]:
    """80/10/10 by count, leftover examples go to train, then val, then test"""
    targets = {
        split: count * tenths // 10 for split, tenths in SPLIT_TENTHS.items()
    }
    remainder = count - sum(targets.values())
    for i in range(remainder):
        targets[manifest.SPLITS[i % len(manifest.SPLITS)]] += 1
    return targets


def shuffled_conversations(ids: list[str], seed: int) -> list[list[int]]:
    """Example positions grouped by conversation, groups in seeded random order"""
    groups = {}
    for position, example_id in enumerate(ids):
        groups.setdefault(util.conversation_of(example_id), []).append(position)
    conversation_ids = sorted(groups)
    rng = numpy.random.default_rng(seed)
    return [groups[conversation_ids[i]] for i in rng.permutation(len(conversation_ids))]


def assign_splits(
    ids: list[str], seed: int, labels: list[int] | None = None
) -> list[str]:
    """Split name per example, keeping each conversation within one split.

    Each shuffled conversation goes to the split furthest below its target
    count (ties: train, val, test). With `labels`, targets are set per class
    and a conversation counts the deficit of each of its examples' classes,
    so every split receives each class in the 80/10/10 proportion.
    """
    if len(ids) < MIN_EXAMPLES:
        raise TooFewExamples(
            f"Need at least {MIN_EXAMPLES} examples to split, got {len(ids)}"
        )
    conversations = shuffled_conversations(ids, seed)
    if len(conversations) < MIN_CONVERSATIONS:
        raise TooFewExamples(
            f"Need at least {MIN_CONVERSATIONS} conversations to split, "
            f"got {len(conversations)}"
        )

    if labels is None:
        labels = [0] * len(ids)
    targets = {
        label: split_targets(count) for label, count in Counter(labels).items()
    }
    filled = {label: {split: 0 for split in manifest.SPLITS} for label in targets}
    assignment = [None] * len(ids)
    for positions in conversations:
        deficits = {
            split: sum(
                targets[labels[p]][split] - filled[labels[p]][split]
                for p in positions
            )
            for split in manifest.SPLITS
        }
        split = max(manifest.SPLITS, key=deficits.get)
        for position in positions:
            filled[labels[position]][split] += 1
            assignment[position] = split

    for split in manifest.SPLITS:
        if split not in assignment:
            logger.warning(f"Split {split} received no conversations")
    return assignment


def split_dataset(
    examples: list[EntailmentExample], seed: int, by: str | None = None
) -> tuple[list[EntailmentExample], list[EntailmentExample], list[EntailmentExample]]:
    """Seeded, conversation-disjoint train/val/test split, stratified on the
    `by` label field when given. Within a split, conversations keep their
    shuffled order and examples their id order."""
    ordered = sorted(examples, key=lambda e: e.id)
    ids = [e.id for e in ordered]
    labels = None if by is None else [int(getattr(e, by)) for e in ordered]
    assignment = assign_splits(ids, seed, labels)

    splits = {split: [] for split in manifest.SPLITS}
    for positions in shuffled_conversations(ids, seed):
        for position in positions:
            splits[assignment[position]].append(ordered[position])
    return splits["train"], splits["val"], splits["test"]


@dataclass
class SplitProcessor(processor.Processor):
    """Adds a split column and orders rows by shuffled conversation.
    Stratifies on the `by` column when set."""

    by: str | None = None

    def _prepare(self):
        self.required_columns = [manifest.ID_FIELD]
        if self.by is not None:
            self.required_columns.append(self.by)
        super()._prepare()

    def _process(self):
        self.data = self.data.sort_values(manifest.ID_FIELD, kind="stable").reset_index(
            drop=True
        )
        ids = list(self.data[manifest.ID_FIELD])
        labels = None
        if self.by is not None:
            if self.data[self.by].isna().any():
                raise EmptyClass(f"Examples without a {self.by} cannot be split")
            labels = [int(v) for v in self.data[self.by]]
        self.data[manifest.SPLIT_FIELD] = assign_splits(ids, self.seed, labels)
        order = [
            position
            for positions in shuffled_conversations(ids, self.seed)
            for position in positions
        ]
        self.data = self.data.iloc[order].reset_index(drop=True)

        sizes = self.data[manifest.SPLIT_FIELD].value_counts()
        logger.info(
            "Split sizes: "
            + ", ".join(f"{s} {int(sizes.get(s, 0))}" for s in manifest.SPLITS)
        )

    def _prepare_export(self):
        self.export_data = self.data
