#!/usr/bin/env python3
"""Generate deterministic kitchen-front sample images for adapter smoke tests."""

from pathlib import Path

import numpy as np
import cv2

LIGHT = (216, 214, 210)
PANEL = (198, 196, 190)
BORDER = (70, 70, 70)
COUNTER = (96, 92, 88)


def _panel(canvas, x0, y0, x1, y1):
    cv2.rectangle(canvas, (x0, y0), (x1, y1), PANEL, thickness=-1)
    cv2.rectangle(canvas, (x0, y0), (x1, y1), BORDER, thickness=3)


def sample_kitchen_six(path):
    """Countertop band, three upper cabinets, two drawers and a cabinet below."""
    canvas = np.full((480, 640, 3), LIGHT, dtype=np.uint8)
    cv2.rectangle(canvas, (10, 230), (630, 262), COUNTER, thickness=-1)
    _panel(canvas, 40, 40, 180, 200)
    _panel(canvas, 220, 40, 360, 200)
    _panel(canvas, 400, 40, 540, 200)
    _panel(canvas, 40, 300, 300, 360)   # wide drawer
    _panel(canvas, 40, 380, 300, 440)   # wide drawer
    _panel(canvas, 340, 300, 480, 440)  # tall cabinet
    cv2.imwrite(str(path), canvas)


def sample_kitchen_three(path):
    canvas = np.full((480, 640, 3), LIGHT, dtype=np.uint8)
    cv2.rectangle(canvas, (10, 200), (630, 230), COUNTER, thickness=-1)
    _panel(canvas, 80, 260, 320, 330)
    _panel(canvas, 80, 350, 320, 420)
    _panel(canvas, 380, 260, 520, 420)
    cv2.imwrite(str(path), canvas)


def sample_sparse(path):
    """Single cabinet; below benchmark eligibility on purpose."""
    canvas = np.full((480, 640, 3), LIGHT, dtype=np.uint8)
    _panel(canvas, 200, 120, 420, 380)
    cv2.imwrite(str(path), canvas)


def main(out_dir="samples"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sample_kitchen_six(out / "sample-kitchen-six.png")
    sample_kitchen_three(out / "sample-kitchen-three.png")
    sample_sparse(out / "sample-sparse.png")
    print(f"wrote 3 samples to {out}/")


if __name__ == "__main__":
    main()
