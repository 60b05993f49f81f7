"""Per-pair orchestration: prompt, query, parse, map to a polygon, checkpoint.

The predictions file is JSONL in canonical pair order regardless of worker
completion order. A checkpoint file (completed count + content hash) is
rewritten every CHECKPOINT_EVERY records and at the end of the run; resume
trusts complete lines already on disk after verifying the checkpointed
prefix hash.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import DataIntegrityError, DeliveryError
from .gateway import ChatGateway, CompletionRequest, EndpointConfig, ImagePayload, SystemClock
from .geometry import BBox, Polygon
from .prompting import (
    build_bbox_prompt,
    build_instructional,
    build_story,
    build_structured,
)
from .scene import ContainerTable
from .verbalize import describe_scene

CHECKPOINT_EVERY = 50

GATEWAY_STRATEGIES = ("structured", "instructional", "story", "bbox_gemini", "bbox_openai_style")
_BBOX_STRATEGIES = ("bbox_gemini", "bbox_openai_style")


@dataclass
class ContainerChoice:
    kind: str  # container_id | bbox | none
    container_local_id: int | None = None
    bbox: BBox | None = None
    unparsed: bool = False
    via_fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "container_local_id": self.container_local_id,
            "bbox": self.bbox.to_list() if self.bbox else None,
            "unparsed": self.unparsed,
            "via_fallback": self.via_fallback,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ContainerChoice":
        return cls(
            kind=doc["kind"],
            container_local_id=doc.get("container_local_id"),
            bbox=BBox(*doc["bbox"]) if doc.get("bbox") else None,
            unparsed=doc.get("unparsed", False),
            via_fallback=doc.get("via_fallback", False),
        )


@dataclass
class PredictionRecord:
    pair_id: str
    image_id: str
    item: str
    strategy: str
    choice: ContainerChoice
    raw_text: str
    resolved_polygon: Polygon | None = None
    timestamp: float = 0.0
    out_of_range: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "image_id": self.image_id,
            "item": self.item,
            "strategy": self.strategy,
            "choice": self.choice.to_dict(),
            "raw_text": self.raw_text,
            "resolved_polygon": self.resolved_polygon.to_list() if self.resolved_polygon else None,
            "timestamp": self.timestamp,
            "out_of_range": self.out_of_range,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PredictionRecord":
        polygon = doc.get("resolved_polygon")
        return cls(
            pair_id=doc["pair_id"],
            image_id=doc["image_id"],
            item=doc["item"],
            strategy=doc["strategy"],
            choice=ContainerChoice.from_dict(doc["choice"]),
            raw_text=doc["raw_text"],
            resolved_polygon=Polygon.from_points(polygon) if polygon else None,
            timestamp=doc.get("timestamp", 0.0),
            out_of_range=doc.get("out_of_range", False),
            error=doc.get("error"),
        )


_BEST_LINE = re.compile(r"best\s+container\s*:\s*(.*)", re.IGNORECASE)
_FIRST_INT = re.compile(r"\d+")
_STANDALONE_INT = re.compile(r"(?<![\d.])\d+(?![\d.])")
_NONE_WORD = re.compile(r"\bnone\b", re.IGNORECASE)
_BRACKET = re.compile(r"\[[^\[\]]*\]")


def extract_container_choice(raw: str) -> ContainerChoice:
    """Pull the chosen container id out of a model reply.

    Scans for a "Best container:" line; the first integer on it wins, a
    literal None means abstention, anything else is unparsed. Without the
    format line, the first standalone integer anywhere is used (flagged
    via_fallback so parse quality can be reported separately).
    """
    for line in raw.splitlines():
        m = _BEST_LINE.search(line)
        if m is None:
            continue
        rest = m.group(1)
        int_match = _FIRST_INT.search(rest)
        if int_match:
            return ContainerChoice(kind="container_id", container_local_id=int(int_match.group()))
        if _NONE_WORD.search(rest):
            return ContainerChoice(kind="none")
        return ContainerChoice(kind="none", unparsed=True)
    fallback = _STANDALONE_INT.search(raw)
    if fallback:
        return ContainerChoice(
            kind="container_id", container_local_id=int(fallback.group()), via_fallback=True
        )
    return ContainerChoice(kind="none", unparsed=True)


def extract_bbox_choice(raw: str) -> ContainerChoice:
    """Pull a bounding box out of a model reply.

    The first bracketed list of four numbers wins; [0, 0, 0, 0] and [] are
    the documented no-answer sentinels; malformed output parses to an
    unparsed abstention.
    """
    for span in _BRACKET.finditer(raw):
        inner = span.group()[1:-1].strip()
        if inner == "":
            return ContainerChoice(kind="none")
        parts = [p.strip() for p in inner.split(",")]
        if len(parts) != 4:
            continue
        try:
            values = [float(p) for p in parts]
        except ValueError:
            continue
        if all(v == 0 for v in values):
            return ContainerChoice(kind="none")
        x_min, y_min, x_max, y_max = values
        if x_min < x_max and y_min < y_max:
            return ContainerChoice(kind="bbox", bbox=BBox(x_min, y_min, x_max, y_max))
        return ContainerChoice(kind="none", unparsed=True)
    return ContainerChoice(kind="none", unparsed=True)


def _encode_record(record: PredictionRecord) -> bytes:
    return (json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":")) + "\n").encode(
        "utf-8"
    )


def _build_request(strategy: str, item: str, table: ContainerTable, images_dir) -> CompletionRequest:
    if strategy in _BBOX_STRATEGIES:
        flavor = "gemini" if strategy == "bbox_gemini" else "openai_style"
        bundle = build_bbox_prompt(item, flavor)
        image = None
        if images_dir is not None:
            image = _load_image_payload(images_dir, table.image_id)
        if image is None:
            raise FileNotFoundError(f"no image file for {table.image_id!r}")
        return CompletionRequest(user_text=bundle.user_text, image=image)
    descriptions = describe_scene(table)
    if strategy == "structured":
        bundle = build_structured(item, descriptions)
    elif strategy == "instructional":
        bundle = build_instructional([item], descriptions)
    elif strategy == "story":
        bundle = build_story(item, descriptions)
    else:
        raise ValueError(f"strategy {strategy!r} is not gateway-driven")
    return CompletionRequest(user_text=bundle.user_text, system_text=bundle.system_text)


_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _load_image_payload(images_dir, image_id: str) -> ImagePayload | None:
    for suffix in _IMAGE_SUFFIXES:
        path = Path(images_dir) / f"{image_id}{suffix}"
        if path.exists():
            media = "image/png" if suffix == ".png" else "image/jpeg"
            return ImagePayload(
                data_base64=base64.b64encode(path.read_bytes()).decode("ascii"),
                media_type=media,
            )
    return None


def _resolve(record: PredictionRecord, table: ContainerTable | None) -> None:
    """Map a container_id choice onto its polygon; out-of-range ids become
    abstentions rather than errors (models hallucinate ids)."""
    choice = record.choice
    if table is None or choice.kind != "container_id":
        return
    container = table.container_by_local_id(choice.container_local_id)
    if container is None:
        record.choice = ContainerChoice(kind="none", via_fallback=choice.via_fallback)
        record.out_of_range = True
    else:
        record.resolved_polygon = container.polygon


class _Checkpoint:
    def __init__(self, path):
        self.path = Path(path)

    def read(self) -> dict | None:
        if not self.path.exists():
            return None
        return json.loads(self.path.read_text(encoding="utf-8"))

    def write(self, completed: int, content_hash: str) -> None:
        payload = {"completed": completed, "sha256": content_hash}
        self.path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def _resume_state(out_path: Path, checkpoint: _Checkpoint) -> tuple[int, bytes]:
    """Number of complete records already on disk plus their exact bytes.

    The checkpointed prefix must hash-match; a torn trailing line is
    discarded. Records written after the last checkpoint are kept.
    """
    if not out_path.exists():
        return 0, b""
    data = out_path.read_bytes()
    last_newline = data.rfind(b"\n")
    data = b"" if last_newline < 0 else data[: last_newline + 1]
    state = checkpoint.read()
    if state is not None:
        lines = data.splitlines(keepends=True)
        if len(lines) < state["completed"]:
            raise DataIntegrityError(
                f"predictions file has {len(lines)} records, checkpoint says {state['completed']}"
            )
        prefix = b"".join(lines[: state["completed"]])
        if hashlib.sha256(prefix).hexdigest() != state["sha256"]:
            raise DataIntegrityError("predictions file does not match checkpoint hash")
    return data.count(b"\n"), data


def run_predictions(
    pairs,
    tables: dict[str, ContainerTable],
    strategy: str,
    endpoint: EndpointConfig,
    out_path,
    gateway: ChatGateway | None = None,
    clock=None,
    resume: bool = False,
    workers: int = 1,
    images_dir=None,
    on_checkpoint=None,
) -> int:
    """Query the endpoint for every pair and stream PredictionRecords to
    ``out_path``. Returns the total number of records in the file."""
    clock = clock or SystemClock()
    gateway = gateway or ChatGateway(clock=clock)
    out_path = Path(out_path)
    checkpoint = _Checkpoint(Path(str(out_path) + ".checkpoint"))

    skip = 0
    hasher = hashlib.sha256()
    if resume:
        skip, existing = _resume_state(out_path, checkpoint)
        hasher.update(existing)
        out_path.write_bytes(existing)  # drop any torn trailing line
    else:
        out_path.write_bytes(b"")

    pending = list(pairs)[skip:]

    def predict_one(pair) -> PredictionRecord:
        table = tables.get(pair.image_id)
        record = PredictionRecord(
            pair_id=pair.pair_id,
            image_id=pair.image_id,
            item=pair.item,
            strategy=strategy,
            choice=ContainerChoice(kind="none"),
            raw_text="",
            timestamp=clock.time(),
        )
        if table is None:
            record.error = "missing-table"
            return record
        try:
            request = _build_request(strategy, pair.item, table, images_dir)
        except FileNotFoundError as exc:
            record.error = f"missing-image: {exc}"
            return record
        try:
            response = gateway.complete(endpoint, request)
        except DeliveryError as exc:
            record.error = f"delivery-failure: {exc}"
            return record
        record.raw_text = response.raw_text
        if strategy in _BBOX_STRATEGIES:
            record.choice = extract_bbox_choice(response.raw_text)
        else:
            record.choice = extract_container_choice(response.raw_text)
        _resolve(record, table)
        return record

    completed = skip

    def consume(results) -> None:
        nonlocal completed
        with out_path.open("ab") as sink:
            for record in results:
                payload = _encode_record(record)
                sink.write(payload)
                sink.flush()
                hasher.update(payload)
                completed += 1
                if completed % CHECKPOINT_EVERY == 0:
                    checkpoint.write(completed, hasher.hexdigest())
                    if on_checkpoint:
                        on_checkpoint(completed)

    if workers <= 1:
        consume(map(predict_one, pending))
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            consume(executor.map(predict_one, pending))
    checkpoint.write(completed, hasher.hexdigest())
    if on_checkpoint:
        on_checkpoint(completed)
    return completed


def load_predictions(path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(PredictionRecord.from_dict(json.loads(line)))
    return records
