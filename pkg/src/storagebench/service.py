"""HTTP backend for the human annotation tool.

Static per-batch assignments, an append-only JSONL annotation log behind a
single writer lock (flushed and fsynced before acknowledging), and task/
progress endpoints consumed by the browser UI.
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from pydantic import BaseModel

from .dataset import AnnotationRecord, ItemImagePair, load_pairs
from .scene import table_from_dict

TRIPLE_RATERS = 3


def build_assignments(
    pairs: list[ItemImagePair],
    annotator_ids: list[str],
    overlap_pair_ids: set[str],
) -> dict[str, list[str]]:
    """Static batch assignment: overlap pairs go to three annotators, the
    rest round-robin to one. Every pair is covered."""
    if overlap_pair_ids and len(annotator_ids) < TRIPLE_RATERS:
        raise ValueError(f"triple labeling needs at least {TRIPLE_RATERS} annotators")
    queues: dict[str, list[str]] = {a: [] for a in annotator_ids}
    ordered = sorted(pairs, key=lambda p: p.pair_id)
    cursor = 0
    for pair in ordered:
        if pair.pair_id in overlap_pair_ids:
            for offset in range(TRIPLE_RATERS):
                queues[annotator_ids[(cursor + offset) % len(annotator_ids)]].append(pair.pair_id)
        else:
            queues[annotator_ids[cursor % len(annotator_ids)]].append(pair.pair_id)
        cursor += 1
    return queues


class AnnotationStore:
    """Filesystem layout under ``data_dir``:

    pairs.jsonl, tables.json, assignments.json, annotations.jsonl (log),
    conflicts.jsonl (audit), images/ (static files for the UI).
    """

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.pairs = {p.pair_id: p for p in load_pairs(self.data_dir / "pairs.jsonl")}
        tables_doc = json.loads((self.data_dir / "tables.json").read_text(encoding="utf-8"))
        self.tables = {doc["image_id"]: table_from_dict(doc) for doc in tables_doc}
        self.assignments: dict[str, list[str]] = json.loads(
            (self.data_dir / "assignments.json").read_text(encoding="utf-8")
        )
        self.log_path = self.data_dir / "annotations.jsonl"
        self.conflict_path = self.data_dir / "conflicts.jsonl"
        self.images_dir = self.data_dir / "images"
        self._lock = threading.Lock()
        self._latest_choice: dict[tuple[str, str], int | None] = {}
        self._answered: dict[str, set[str]] = {a: set() for a in self.assignments}
        self._replay_log()

    def _replay_log(self) -> None:
        if not self.log_path.exists():
            return
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = AnnotationRecord.from_dict(json.loads(line))
            self._latest_choice[(record.annotator_id, record.pair_id)] = record.container_local_id
            self._answered.setdefault(record.annotator_id, set()).add(record.pair_id)

    def _append(self, path: Path, payload: dict) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def container_count(self, pair_id: str) -> int:
        pair = self.pairs[pair_id]
        return len(self.tables[pair.image_id].containers)

    def next_task(self, annotator_id: str) -> dict:
        if annotator_id not in self.assignments:
            raise KeyError(annotator_id)
        answered = self._answered.get(annotator_id, set())
        for pair_id in self.assignments[annotator_id]:
            if pair_id in answered:
                continue
            pair = self.pairs[pair_id]
            table = self.tables[pair.image_id]
            return {
                "done": False,
                "pair_id": pair_id,
                "item": pair.item,
                "image_id": pair.image_id,
                "image_url": f"/images/{pair.image_id}",
                "image_width": table.image_width,
                "image_height": table.image_height,
                "containers": [
                    {"local_id": c.local_id, "polygon": c.polygon.to_list()}
                    for c in table.containers
                ],
            }
        return {"done": True}

    def submit(self, annotator_id: str, pair_id: str, container_local_id: int | None) -> dict:
        if pair_id not in self.pairs:
            raise KeyError(pair_id)
        if annotator_id not in self.assignments or pair_id not in self.assignments[annotator_id]:
            raise PermissionError(f"pair {pair_id} not assigned to {annotator_id}")
        if container_local_id is not None and not (
            1 <= container_local_id <= self.container_count(pair_id)
        ):
            raise ValueError(
                f"container id {container_local_id} out of range for pair {pair_id}"
            )
        record = AnnotationRecord(
            pair_id=pair_id,
            annotator_id=annotator_id,
            container_local_id=container_local_id,
            submitted_at=time.time(),
        )
        with self._lock:
            key = (annotator_id, pair_id)
            previous = self._latest_choice.get(key)
            if key in self._latest_choice and previous != container_local_id:
                self._append(
                    self.conflict_path,
                    {
                        "pair_id": pair_id,
                        "annotator_id": annotator_id,
                        "kept": container_local_id,
                        "discarded": previous,
                    },
                )
            self._append(self.log_path, record.to_dict())
            self._latest_choice[key] = container_local_id
            self._answered.setdefault(annotator_id, set()).add(pair_id)
        return {"ok": True}

    def progress(self, annotator_id: str) -> dict:
        if annotator_id not in self.assignments:
            raise KeyError(annotator_id)
        total = len(self.assignments[annotator_id])
        answered = len(
            self._answered.get(annotator_id, set()) & set(self.assignments[annotator_id])
        )
        return {"answered": answered, "remaining": total - answered, "total": total}


class SubmitBody(BaseModel):
    annotator_id: str
    pair_id: str
    container_local_id: int | None = None


def create_app(store: AnnotationStore) -> FastAPI:
    app = FastAPI(title="storagebench annotation service")

    @app.get("/api/tasks/next")
    def next_task(annotator: str):
        try:
            return store.next_task(annotator)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown annotator {annotator!r}")

    @app.post("/api/annotations")
    def submit(body: SubmitBody):
        try:
            return store.submit(body.annotator_id, body.pair_id, body.container_local_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown pair {body.pair_id!r}")
        except PermissionError as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/api/progress")
    def progress(annotator: str):
        try:
            return store.progress(annotator)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown annotator {annotator!r}")

    @app.get("/images/{image_id}")
    def image(image_id: str):
        for suffix in (".png", ".jpg", ".jpeg"):
            path = store.images_dir / f"{image_id}{suffix}"
            if path.exists():
                return FileResponse(path)
        raise HTTPException(status_code=404, detail=f"no image for {image_id!r}")

    @app.get("/")
    def index():
        page = store.data_dir / "ui" / "index.html"
        if page.exists():
            return FileResponse(page)
        raise HTTPException(status_code=404, detail="UI not installed")

    @app.get("/ui/{asset}")
    def ui_asset(asset: str):
        path = store.data_dir / "ui" / asset
        if path.exists() and path.is_file():
            return FileResponse(path)
        raise HTTPException(status_code=404, detail=f"no asset {asset!r}")

    return app
