"""Tunable thresholds and vocabularies, overridable from a config file."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

# The benchmark's default 15-item vocabulary.
DEFAULT_ITEMS = (
    "bottle opener",
    "Tupperware containers",
    "dish towels",
    "cutting board",
    "bowl",
    "spices",
    "spoon",
    "mug",
    "plate",
    "pot",
    "pan",
    "cutting knife",
    "cooking oil",
    "screwdrivers",
    "painkillers",
)

DEFAULT_ANCHORS = (
    "sink",
    "oven",
    "stove",
    "dishwasher",
    "refrigerator",
    "microwave",
    "coffee machine",
    "electronic kettle",
    "dish drying rack",
)


@dataclass(frozen=True)
class FeatureConfig:
    """Thresholds for spatial feature extraction.

    Ratios `aspect_wide`/`aspect_tall` classify width/height; the two
    fractions are taken of the image diagonal.
    """

    aspect_wide: float = 1.25
    aspect_tall: float = 0.8
    neighbor_gap_fraction: float = 0.02
    close_fraction: float = 0.15
    anchor_vocabulary: tuple[str, ...] = DEFAULT_ANCHORS
    items: tuple[str, ...] = DEFAULT_ITEMS


def load_feature_config(path: str | Path | None) -> FeatureConfig:
    """Read overrides from a YAML or JSON file; missing keys keep defaults."""
    cfg = FeatureConfig()
    if path is None:
        return cfg
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if not data:
        return cfg
    overrides = {}
    for key in (
        "aspect_wide",
        "aspect_tall",
        "neighbor_gap_fraction",
        "close_fraction",
    ):
        if key in data:
            overrides[key] = float(data[key])
    if "anchor_vocabulary" in data:
        overrides["anchor_vocabulary"] = tuple(data["anchor_vocabulary"])
    if "items" in data:
        overrides["items"] = tuple(data["items"])
    return replace(cfg, **overrides)
