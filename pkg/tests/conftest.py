import json
from pathlib import Path

import pytest

from storagebench.features import featurize
from storagebench.scene import detections_from_dict


def _square(x0, y0, w, h):
    return [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]]


def kitchen_scene_doc():
    """Six containers around a countertop, a coffee machine and a dishwasher.

    Engineered so description lines come out with one close anchor each:
    three cabinet doors above the countertop, a drawer/cabinet pair flanking
    the dishwasher, and one bare drawer.
    """
    return {
        "image_id": "kitchen-a",
        "width": 1000,
        "height": 800,
        "containers": [
            {"label": "cabinet door", "confidence": 0.91, "polygon": _square(90, 100, 100, 100)},
            {"label": "cabinet door", "confidence": 0.88, "polygon": _square(300, 100, 100, 100)},
            {"label": "cabinet door", "confidence": 0.83, "polygon": _square(520, 100, 100, 100)},
            {"label": "drawer", "confidence": 0.95, "polygon": _square(280, 510, 100, 100)},
            {"label": "cabinet door", "confidence": 0.9, "polygon": _square(620, 510, 100, 100)},
            {"label": "drawer", "confidence": 0.72, "polygon": _square(800, 520, 100, 100)},
        ],
        "anchors": [
            {"label": "coffee machine", "confidence": 0.8, "polygon": _square(100, 300, 80, 80)},
            {"label": "dishwasher", "confidence": 0.85, "polygon": _square(420, 420, 160, 280)},
        ],
        "countertop": [[0, 390], [1000, 390], [1000, 410], [0, 410]],
    }


KITCHEN_A_LINES = [
    "Container 1: cabinet door above the countertop, located above the coffee machine.",
    "Container 2: cabinet door above the countertop.",
    "Container 3: cabinet door above the countertop.",
    "Container 4: drawer below the countertop, located to the left of the dishwasher.",
    "Container 5: cabinet door below the countertop, located to the right of the dishwasher.",
    "Container 6: drawer below the countertop.",
]


def pantry_scene_doc():
    """Three containers, five anchors, no countertop detected.

    The middle drawer relates to four anchors (two via closeness, two via
    closest-container assignment), the last cabinet sits under the
    dishwasher, and the first cabinet has no spatial context at all.
    """
    return {
        "image_id": "kitchen-b",
        "width": 1200,
        "height": 900,
        "containers": [
            {"label": "cabinet door", "confidence": 0.77, "polygon": _square(0, 100, 100, 100)},
            {"label": "drawer", "confidence": 0.93, "polygon": _square(500, 400, 120, 100)},
            {"label": "cabinet door", "confidence": 0.85, "polygon": _square(920, 680, 120, 100)},
        ],
        "anchors": [
            {"label": "electronic kettle", "confidence": 0.7, "polygon": _square(500, 200, 100, 100)},
            {"label": "oven", "confidence": 0.9, "polygon": _square(480, 600, 200, 200)},
            {"label": "refrigerator", "confidence": 0.88, "polygon": _square(220, 120, 200, 400)},
            {"label": "dish drying rack", "confidence": 0.6, "polygon": _square(800, 180, 150, 120)},
            {"label": "dishwasher", "confidence": 0.8, "polygon": _square(900, 500, 180, 150)},
        ],
        "countertop": None,
    }


KITCHEN_B_LINES = [
    "Container 1: cabinet door.",
    "Container 2: drawer, located below the electronic kettle, above the oven, "
    "at the bottom-right of the refrigerator, and at the bottom-left of the dish drying rack.",
    "Container 3: cabinet door, located below the dishwasher.",
]


@pytest.fixture
def kitchen_a():
    return featurize(detections_from_dict(kitchen_scene_doc()))


@pytest.fixture
def kitchen_b():
    return featurize(detections_from_dict(pantry_scene_doc()))


@pytest.fixture
def fixture_dir(tmp_path):
    """Write both scenes to a detections file and return the directory."""
    path = tmp_path / "detections.json"
    path.write_text(
        json.dumps([kitchen_scene_doc(), pantry_scene_doc()], indent=2), encoding="utf-8"
    )
    return tmp_path


def golden_path(name) -> Path:
    return Path(__file__).parent / "golden" / name
