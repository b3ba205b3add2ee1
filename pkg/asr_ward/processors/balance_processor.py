from dataclasses import dataclass
import logging

import numpy

from asr_ward import util
from asr_ward.errors import EmptyClass
from asr_ward.manifests import manifest
from asr_ward.models import EntailmentExample
from asr_ward.processors import processor

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


def balanced_positions(ids: list[str], labels: list[int], seed: int) -> list[int]:
    """Positions of the examples kept after downsampling the majority class,
    in a seeded shuffled order.

    Each class is first put in id order so the draw does not depend on the
    order examples arrive in.
    """
    rng = numpy.random.default_rng(seed)
    by_class = {0: [], 1: []}
    for position, label in enumerate(labels):
        by_class[int(label)].append(position)

    for label, positions in by_class.items():
        if not positions:
            raise EmptyClass(f"No examples with label {label}")

    keep_count = min(len(positions) for positions in by_class.values())
    kept = []
    for label in (0, 1):
        positions = sorted(by_class[label], key=lambda p: ids[p])
        if len(positions) > keep_count:
            chosen = rng.choice(len(positions), size=keep_count, replace=False)
            positions = [positions[i] for i in sorted(chosen)]
        kept.extend(positions)

    return [kept[i] for i in rng.permutation(len(kept))]


def balance(
    examples: list[EntailmentExample], by: str = manifest.LABEL_FIELD, seed: int = 0
) -> list[EntailmentExample]:
    if not examples:
        raise EmptyClass("Cannot balance an empty example list")
    positions = balanced_positions(
        [e.id for e in examples], [getattr(e, by) for e in examples], seed
    )
    return [examples[p] for p in positions]


@dataclass
class BalanceProcessor(processor.Processor):
    """Downsamples the majority class of `by`. With `within` set, each group
    of that column is balanced on its own and rows keep their order; a group
    missing a class is emptied."""

    by: str = manifest.LABEL_FIELD
    within: str | None = None

    def _prepare(self):
        self.required_columns = [manifest.ID_FIELD, self.by]
        if self.within is not None:
            self.required_columns.append(self.within)
        super()._prepare()

    def _process(self):
        if self.data.empty:
            raise EmptyClass("Cannot balance an empty example list")
        labels = self.data[self.by]
        if labels.isna().any():
            raise EmptyClass(f"Examples without a {self.by} cannot be balanced")

        ids = list(self.data[manifest.ID_FIELD])
        labels = [int(v) for v in labels]
        if self.within is None:
            positions = balanced_positions(ids, labels, self.seed)
        else:
            positions = self._balanced_group_positions(ids, labels)
        self.data = self.data.iloc[positions].reset_index(drop=True)
        counts = self.data[self.by].value_counts()
        logger.info(
            f"Balanced on {self.by}: {counts.get(0, 0)} negative, "
            f"{counts.get(1, 0)} positive"
        )

    def _balanced_group_positions(self, ids: list[str], labels: list[int]):
        groups = {}
        for position, group in enumerate(self.data[self.within]):
            groups.setdefault(group, []).append(position)

        kept = []
        for group in sorted(groups):
            positions = groups[group]
            try:
                chosen = balanced_positions(
                    [ids[p] for p in positions],
                    [labels[p] for p in positions],
                    util.derive_seed(self.seed, str(group)),
                )
            except EmptyClass as e:
                logger.warning(f"Dropping {self.within} {group}: {e}")
                continue
            kept.extend(positions[i] for i in chosen)
        return sorted(kept)

    def _prepare_export(self):
        self.export_data = self.data
