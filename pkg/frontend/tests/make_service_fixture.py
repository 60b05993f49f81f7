#!/usr/bin/env python3
"""Build an annotation-service data directory for the UI flow test."""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from storagebench.dataset import ItemImagePair, save_jsonl
from storagebench.features import featurize
from storagebench.scene import detections_from_dict, table_to_dict


def square(x0, y0, w, h):
    return [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]]


SCENE = {
    "image_id": "kitchen-a",
    "width": 1000,
    "height": 800,
    "containers": [
        {"label": "cabinet door", "confidence": 0.91, "polygon": square(90, 100, 100, 100)},
        {"label": "cabinet door", "confidence": 0.88, "polygon": square(300, 100, 100, 100)},
        {"label": "cabinet door", "confidence": 0.83, "polygon": square(520, 100, 100, 100)},
        {"label": "drawer", "confidence": 0.95, "polygon": square(280, 510, 100, 100)},
        {"label": "cabinet door", "confidence": 0.9, "polygon": square(620, 510, 100, 100)},
        {"label": "drawer", "confidence": 0.72, "polygon": square(800, 520, 100, 100)},
    ],
    "anchors": [],
    "countertop": [[0, 390], [1000, 390], [1000, 410], [0, 410]],
}

# 1x1 transparent PNG
PNG_BYTES = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c489"
    "0000000d49444154789c6260606060000000050001a5f645400000000049454e44ae426082"
)


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = featurize(detections_from_dict(SCENE))
    (out / "tables.json").write_text(json.dumps([table_to_dict(table)]), encoding="utf-8")

    pairs = [
        ItemImagePair.make("kitchen-a", "mug"),
        ItemImagePair.make("kitchen-a", "spoon"),
        ItemImagePair.make("kitchen-a", "pot"),
    ]
    save_jsonl(out / "pairs.jsonl", pairs)
    (out / "assignments.json").write_text(
        json.dumps({"tester": [p.pair_id for p in pairs]}), encoding="utf-8"
    )
    (out / "images").mkdir(exist_ok=True)
    (out / "images" / "kitchen-a.png").write_bytes(PNG_BYTES)
    print(out)


if __name__ == "__main__":
    main(sys.argv[1])
