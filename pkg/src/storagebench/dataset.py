"""Benchmark dataset plumbing: pair sampling, annotation records, cleaning,
ground-truth consolidation, and dataset splitting."""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import QuotaError
from .scene import ContainerTable


def _rng(seed: int, *keys) -> random.Random:
    material = f"{seed}|" + "|".join(str(k) for k in keys)
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def pair_id_for(image_id: str, item: str) -> str:
    """Stable content hash so merges across annotation batches line up."""
    digest = hashlib.sha256(f"{image_id}\x1f{item}".encode("utf-8")).hexdigest()
    return digest[:12]


@dataclass
class ItemImagePair:
    pair_id: str
    image_id: str
    item: str
    split: str = "unassigned"  # development | evaluation | unassigned
    source: str = "crowd"  # crowd | real_world

    @classmethod
    def make(cls, image_id: str, item: str, source: str = "crowd") -> "ItemImagePair":
        return cls(pair_id=pair_id_for(image_id, item), image_id=image_id, item=item, source=source)

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "image_id": self.image_id,
            "item": self.item,
            "split": self.split,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ItemImagePair":
        return cls(
            pair_id=doc["pair_id"],
            image_id=doc["image_id"],
            item=doc["item"],
            split=doc.get("split", "unassigned"),
            source=doc.get("source", "crowd"),
        )


@dataclass
class AnnotationRecord:
    pair_id: str
    annotator_id: str
    container_local_id: int | None  # None is the explicit "no container" answer
    submitted_at: float

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "annotator_id": self.annotator_id,
            "container_local_id": self.container_local_id,
            "submitted_at": self.submitted_at,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AnnotationRecord":
        return cls(
            pair_id=doc["pair_id"],
            annotator_id=doc["annotator_id"],
            container_local_id=doc.get("container_local_id"),
            submitted_at=doc["submitted_at"],
        )


@dataclass
class GroundTruth:
    pair_id: str
    container_local_id: int | None
    provenance: str  # unanimous | majority | random_tiebreak | single

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "container_local_id": self.container_local_id,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        return cls(
            pair_id=doc["pair_id"],
            container_local_id=doc.get("container_local_id"),
            provenance=doc["provenance"],
        )


def sample_pairs(
    tables: list[ContainerTable],
    items: list[str],
    per_item: int,
    seed: int,
    real_world_image_ids: frozenset[str] = frozenset(),
    vocabulary=None,
) -> list[ItemImagePair]:
    """Per item, sample ``per_item`` benchmark-eligible images (>= 3
    containers) without replacement. Sampling is independent per item so
    dataset subsets reproduce identically. Items must come from the
    configured vocabulary (defaults to the benchmark's 15 items)."""
    from .config import DEFAULT_ITEMS

    allowed = set(vocabulary if vocabulary is not None else DEFAULT_ITEMS)
    unknown = [item for item in items if item not in allowed]
    if unknown:
        raise ValueError(f"items not in the vocabulary: {unknown}")
    eligible = [t.image_id for t in tables if len(t.containers) >= 3]
    pairs = []
    for item in items:
        if per_item > len(eligible):
            raise QuotaError(
                f"item {item!r} needs {per_item} images but only {len(eligible)} are eligible",
                item=item,
            )
        chosen = _rng(seed, "sample", item).sample(eligible, per_item)
        for image_id in chosen:
            source = "real_world" if image_id in real_world_image_ids else "crowd"
            pairs.append(ItemImagePair.make(image_id, item, source=source))
    return pairs


def assign_overlap(pairs: list[ItemImagePair], fraction: float, seed: int) -> set[str]:
    """Mark ceil(fraction x count) pairs per item for triple labeling."""
    marked: set[str] = set()
    by_item: dict[str, list[ItemImagePair]] = {}
    for pair in pairs:
        by_item.setdefault(pair.item, []).append(pair)
    for item, group in sorted(by_item.items()):
        count = math.ceil(fraction * len(group))
        if count <= 0:
            continue
        ordered = sorted(group, key=lambda p: p.pair_id)
        marked.update(p.pair_id for p in _rng(seed, "overlap", item).sample(ordered, count))
    return marked


def _choice_key(local_id: int | None):
    return (1,) if local_id is None else (0, local_id)


def dedup(annotations: list[AnnotationRecord]) -> tuple[list[AnnotationRecord], list[dict]]:
    """Collapse exact duplicates; keep the latest of conflicting resubmissions.

    Returns (cleaned records sorted canonically, audit list of conflicts).
    Idempotent: a second pass changes nothing.
    """
    grouped: dict[tuple[str, str], list[AnnotationRecord]] = {}
    for record in annotations:
        grouped.setdefault((record.pair_id, record.annotator_id), []).append(record)
    cleaned = []
    conflicts = []
    for (pair_id, annotator_id), group in sorted(grouped.items()):
        distinct = {record.container_local_id for record in group}
        winner = max(group, key=lambda r: (r.submitted_at, _choice_key(r.container_local_id)))
        if len(distinct) > 1:
            conflicts.append(
                {
                    "pair_id": pair_id,
                    "annotator_id": annotator_id,
                    "kept": winner.container_local_id,
                    "discarded": sorted(
                        (d for d in distinct if d != winner.container_local_id),
                        key=_choice_key,
                    ),
                }
            )
        cleaned.append(winner)
    return cleaned, conflicts


def consolidate(
    annotations: list[AnnotationRecord],
    seed: int,
    expected_pair_ids=None,
) -> tuple[list[GroundTruth], list[dict]]:
    """Reduce annotations to one GroundTruth per pair.

    Unanimity keeps the choice; a choice with a strict plurality of >= 2
    votes wins a majority; otherwise a seeded uniform pick among the tied
    choices (random_tiebreak); a lone annotation passes through as single.
    Deterministic per seed and independent of input record order.
    """
    votes: dict[str, list[int | None]] = {}
    for record in annotations:
        votes.setdefault(record.pair_id, []).append(record.container_local_id)

    truths = []
    audit = []
    for pair_id in sorted(votes):
        choices = sorted(votes[pair_id], key=_choice_key)
        distinct = sorted(set(choices), key=_choice_key)
        if len(choices) == 1:
            truths.append(GroundTruth(pair_id, choices[0], "single"))
            continue
        if len(distinct) == 1:
            truths.append(GroundTruth(pair_id, distinct[0], "unanimous"))
            continue
        counts = {value: choices.count(value) for value in distinct}
        top = max(counts.values())
        leaders = [value for value in distinct if counts[value] == top]
        if top >= 2 and len(leaders) == 1:
            truths.append(GroundTruth(pair_id, leaders[0], "majority"))
            continue
        pick = _rng(seed, "consolidate", pair_id).choice(leaders)
        truths.append(GroundTruth(pair_id, pick, "random_tiebreak"))

    if expected_pair_ids is not None:
        for pair_id in sorted(set(expected_pair_ids) - set(votes)):
            audit.append({"pair_id": pair_id, "reason": "no annotations"})
    return truths, audit


def split(
    pairs: list[ItemImagePair],
    rule: str = "source",
    fraction: float | None = None,
    seed: int = 0,
) -> list[ItemImagePair]:
    """Assign splits in place and return the pairs.

    ``source``: real-world pairs go to evaluation, the rest to development.
    ``fraction``: a seeded sample of ceil(fraction x N) pairs goes to
    evaluation.
    """
    if rule == "source":
        for pair in pairs:
            pair.split = "evaluation" if pair.source == "real_world" else "development"
        return pairs
    if rule == "fraction":
        if fraction is None:
            raise ValueError("fractional split needs a fraction")
        count = math.ceil(fraction * len(pairs))
        ordered = sorted(pairs, key=lambda p: p.pair_id)
        chosen = {p.pair_id for p in _rng(seed, "split").sample(ordered, count)}
        for pair in pairs:
            pair.split = "evaluation" if pair.pair_id in chosen else "development"
        return pairs
    raise ValueError(f"unknown split rule {rule!r}")


# --- JSONL helpers -----------------------------------------------------------


def save_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def load_pairs(path) -> list[ItemImagePair]:
    return [
        ItemImagePair.from_dict(json.loads(line))
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def load_annotations(path) -> list[AnnotationRecord]:
    return [
        AnnotationRecord.from_dict(json.loads(line))
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def load_ground_truth(path) -> list[GroundTruth]:
    return [
        GroundTruth.from_dict(json.loads(line))
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
