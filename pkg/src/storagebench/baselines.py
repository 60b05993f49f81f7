"""Non-neural reference predictors: seeded random choice and
highest-confidence detector output."""

from __future__ import annotations

import hashlib
import json
import random
from pathlib import Path

from .errors import EmptySceneError
from .pipeline import ContainerChoice, PredictionRecord, _encode_record
from .scene import ContainerTable, Detection


def _pair_rng(seed: int, pair_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}|{pair_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def random_choice(table: ContainerTable, seed: int, pair_id: str) -> ContainerChoice:
    """Uniform pick over the image's containers, keyed by (seed, pair_id)
    so any subset of the dataset reproduces identically."""
    if not table.containers:
        raise EmptySceneError(f"image {table.image_id!r} has no containers")
    local_id = _pair_rng(seed, pair_id).randrange(len(table.containers)) + 1
    return ContainerChoice(kind="container_id", container_local_id=local_id)


def highest_confidence_choice(detections: list[Detection]) -> ContainerChoice:
    """Bounding box of the most confident detection; earliest wins ties;
    an empty detection list is an abstention."""
    if not detections:
        return ContainerChoice(kind="none")
    best = max(enumerate(detections), key=lambda pair: (pair[1].confidence, -pair[0]))[1]
    return ContainerChoice(kind="bbox", bbox=best.bbox)


def run_random_baseline(
    pairs,
    tables: dict[str, ContainerTable],
    seed: int,
    out_path,
) -> int:
    """Write a predictions file for the random chooser (strategy "random")."""
    out_path = Path(out_path)
    written = 0
    with out_path.open("wb") as sink:
        for pair in pairs:
            table = tables.get(pair.image_id)
            record = PredictionRecord(
                pair_id=pair.pair_id,
                image_id=pair.image_id,
                item=pair.item,
                strategy="random",
                choice=ContainerChoice(kind="none"),
                raw_text="",
            )
            if table is None:
                record.error = "missing-table"
            else:
                record.choice = random_choice(table, seed, pair.pair_id)
                container = table.container_by_local_id(record.choice.container_local_id)
                record.resolved_polygon = container.polygon
            sink.write(_encode_record(record))
            written += 1
    return written


def run_highest_confidence_baseline(
    pairs,
    detections_by_pair: dict[str, list[Detection]],
    strategy: str,
    out_path,
) -> int:
    """Write a predictions file from item-conditioned detector output
    (strategy "gdino_item" or "gdino_no_item")."""
    out_path = Path(out_path)
    written = 0
    with out_path.open("wb") as sink:
        for pair in pairs:
            detections = detections_by_pair.get(pair.pair_id, [])
            record = PredictionRecord(
                pair_id=pair.pair_id,
                image_id=pair.image_id,
                item=pair.item,
                strategy=strategy,
                choice=highest_confidence_choice(detections),
                raw_text="",
            )
            sink.write(_encode_record(record))
            written += 1
    return written


def load_item_detections(path) -> dict[str, list[Detection]]:
    """JSONL of {"pair_id", "detections": [{"label", "confidence", "polygon"}]}."""
    from .geometry import Polygon

    result: dict[str, list[Detection]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        result[doc["pair_id"]] = [
            Detection(
                raw_label=entry["label"],
                confidence=entry["confidence"],
                polygon=Polygon.from_points(entry["polygon"]),
            )
            for entry in doc["detections"]
        ]
    return result
