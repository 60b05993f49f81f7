#!/usr/bin/env python3
"""Offline detector adapter: produce detections JSON from an image.

Three modes map to the three detection passes the benchmark needs:
  bulk    - every visible storage container ("drawer . cabinet door")
  item    - item-conditioned detection ("drawer for {item} . cabinet door for {item}"),
            output sorted by confidence
  anchors - anchor objects and the countertop

Backends:
  grounding_dino_sam - open-set detector + segmenter (needs the model
                       weights and their packages installed; box_threshold
                       0.30, text_threshold 0.25, masks simplified with RDP
                       epsilon = 0.02 x arc length)
  contour            - lightweight OpenCV rectangle detector for fixtures
                       and offline tests (same polygonization path; no
                       anchor labels)
  auto               - grounding_dino_sam when importable, else contour

The output of `bulk` (and of `merge`) validates against the benchmark's
detections-file schema; `anchors` output is a partial document meant to be
merged into a bulk document with the `merge` mode.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import cv2
import numpy as np

BOX_THRESHOLD = 0.30
TEXT_THRESHOLD = 0.25
RDP_EPSILON_FRACTION = 0.02

ANCHOR_VOCABULARY = (
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

# Kept textually in sync with the benchmark's prompt builders; a test
# cross-checks them against the primary package.
BULK_PROMPT = "drawer . cabinet door"


def item_prompt(item: str) -> str:
    return f"drawer for {item} . cabinet door for {item}"


def anchors_prompt() -> str:
    return " . ".join(ANCHOR_VOCABULARY) + " . countertop"


def simplify_contour(contour: np.ndarray) -> list[list[float]]:
    """Contour -> polygon via RDP with epsilon = 0.02 x arc length."""
    epsilon = RDP_EPSILON_FRACTION * cv2.arcLength(contour, True)
    approx = cv2.approxPolyDP(contour, epsilon, True)
    return [[float(x), float(y)] for x, y in approx.reshape(-1, 2)]


def mask_to_polygon(mask: np.ndarray) -> list[list[float]] | None:
    """Largest external contour of a binary mask, RDP-simplified."""
    contours, _ = cv2.findContours(
        mask.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE
    )
    if not contours:
        return None
    largest = max(contours, key=cv2.contourArea)
    polygon = simplify_contour(largest)
    return polygon if len(polygon) >= 3 else None


# --- contour backend ---------------------------------------------------------


def _rect_iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union else 0.0


def detect_contour(image: np.ndarray):
    """Classical rectangle detector: dark-bordered panels on light fronts.

    Returns (containers, countertop_polygon). Containers carry a
    rectangularity-based confidence. Anchor objects are not detectable
    without an open-set model, so this backend never emits them.
    """
    height, width = image.shape[:2]
    gray = cv2.cvtColor(image, cv2.COLOR_BGR2GRAY)
    _, binary = cv2.threshold(gray, 0, 255, cv2.THRESH_BINARY_INV + cv2.THRESH_OTSU)
    contours, _ = cv2.findContours(binary, cv2.RETR_LIST, cv2.CHAIN_APPROX_SIMPLE)

    image_area = width * height
    candidates = []
    for contour in contours:
        area = cv2.contourArea(contour)
        if area < 0.002 * image_area or area > 0.6 * image_area:
            continue
        x, y, w, h = cv2.boundingRect(contour)
        rectangularity = area / (w * h)
        if rectangularity < 0.7:
            continue
        polygon = simplify_contour(contour)
        if len(polygon) < 3:
            continue
        candidates.append(
            {
                "rect": (x, y, w, h),
                "polygon": polygon,
                "confidence": round(min(1.0, rectangularity), 4),
            }
        )

    # border contours come in outer/inner pairs; keep the more rectangular one
    deduped = []
    for candidate in sorted(candidates, key=lambda c: -c["confidence"]):
        if all(_rect_iou(candidate["rect"], kept["rect"]) < 0.8 for kept in deduped):
            deduped.append(candidate)

    containers = []
    countertop = None
    for candidate in sorted(deduped, key=lambda c: (c["rect"][1], c["rect"][0])):
        x, y, w, h = candidate["rect"]
        if w > 0.8 * width and h < 0.12 * height:
            if countertop is None:
                countertop = candidate["polygon"]
            continue
        label = "drawer" if w / h > 1.4 else "cabinet door"
        containers.append(
            {"label": label, "confidence": candidate["confidence"], "polygon": candidate["polygon"]}
        )
    return containers, countertop


# --- grounding-dino + segmenter backend --------------------------------------


def detect_grounding_dino_sam(image_bgr: np.ndarray, prompt: str, weights_dir: str):
    """Open-set detection + mask segmentation. Requires the `groundingdino`
    and `segment_anything` packages plus local weight files:
    ``{weights_dir}/groundingdino_swint_ogc.pth`` (+ its config) and
    ``{weights_dir}/sam_vit_h.pth``."""
    try:
        import torch
        from groundingdino.util.inference import load_model, predict
        import groundingdino.datasets.transforms as T
        from segment_anything import SamPredictor, sam_model_registry
    except ImportError as exc:
        raise RuntimeError(
            "grounding_dino_sam backend needs the groundingdino and "
            f"segment_anything packages: {exc}"
        ) from None

    weights = Path(weights_dir)
    model = load_model(
        str(weights / "GroundingDINO_SwinT_OGC.py"),
        str(weights / "groundingdino_swint_ogc.pth"),
    )
    image_rgb = cv2.cvtColor(image_bgr, cv2.COLOR_BGR2RGB)
    transform = T.Compose(
        [
            T.RandomResize([800], max_size=1333),
            T.ToTensor(),
            T.Normalize([0.485, 0.456, 0.406], [0.229, 0.224, 0.225]),
        ]
    )
    from PIL import Image as PILImage

    tensor, _ = transform(PILImage.fromarray(image_rgb), None)
    boxes, logits, phrases = predict(
        model=model,
        image=tensor,
        caption=prompt,
        box_threshold=BOX_THRESHOLD,
        text_threshold=TEXT_THRESHOLD,
    )

    sam = sam_model_registry["vit_h"](checkpoint=str(weights / "sam_vit_h.pth"))
    predictor = SamPredictor(sam)
    predictor.set_image(image_rgb)

    height, width = image_bgr.shape[:2]
    scale = np.array([width, height, width, height])
    detections = []
    for box, logit, phrase in zip(boxes, logits, phrases):
        cx, cy, w, h = (box.numpy() * scale).tolist()
        xyxy = np.array([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])
        transformed = predictor.transform.apply_boxes_torch(
            torch.as_tensor(xyxy[None, :], dtype=torch.float32), (height, width)
        )
        masks, _, _ = predictor.predict_torch(
            point_coords=None, point_labels=None, boxes=transformed, multimask_output=False
        )
        polygon = mask_to_polygon(masks[0, 0].cpu().numpy())
        if polygon is None:
            continue
        detections.append(
            {"label": phrase, "confidence": round(float(logit), 4), "polygon": polygon}
        )
    return detections


# --- document assembly --------------------------------------------------------


def _pick_backend(name: str) -> str:
    if name != "auto":
        return name
    try:
        import groundingdino  # noqa: F401
        import segment_anything  # noqa: F401

        return "grounding_dino_sam"
    except ImportError:
        return "contour"


def _is_anchor(label: str) -> bool:
    return any(word in label for word in ANCHOR_VOCABULARY)


def build_document(image_path: str, mode: str, item: str | None, backend: str, weights_dir: str):
    image = cv2.imread(str(image_path))
    if image is None:
        raise SystemExit(f"error: cannot read image {image_path}")
    height, width = image.shape[:2]
    image_id = Path(image_path).stem

    if mode == "bulk":
        prompt = BULK_PROMPT
    elif mode == "item":
        if not item:
            raise SystemExit("error: --mode item needs --item")
        prompt = item_prompt(item)
    else:
        prompt = anchors_prompt()

    backend = _pick_backend(backend)
    countertop = None
    anchors = []
    if backend == "contour":
        containers, countertop = detect_contour(image)
        if mode == "anchors":
            containers = []
    else:
        raw = detect_grounding_dino_sam(image, prompt, weights_dir)
        containers = []
        for detection in raw:
            if "countertop" in detection["label"]:
                countertop = countertop or detection["polygon"]
            elif _is_anchor(detection["label"]):
                anchors.append(detection)
            else:
                containers.append(detection)
        if mode == "anchors":
            containers = []

    if mode == "item":
        containers.sort(key=lambda c: -c["confidence"])

    return {
        "image_id": image_id,
        "width": width,
        "height": height,
        "containers": containers,
        "anchors": anchors,
        "countertop": countertop,
        "metadata": {
            "backend": backend,
            "mode": mode,
            "prompt": prompt,
            "box_threshold": BOX_THRESHOLD,
            "text_threshold": TEXT_THRESHOLD,
        },
    }


def merge_documents(bulk_doc: dict, anchors_doc: dict) -> dict:
    if bulk_doc["image_id"] != anchors_doc["image_id"]:
        raise SystemExit("error: merge inputs describe different images")
    merged = dict(bulk_doc)
    merged["anchors"] = anchors_doc.get("anchors", [])
    merged["countertop"] = anchors_doc.get("countertop") or bulk_doc.get("countertop")
    return merged


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--mode", choices=["bulk", "item", "anchors", "merge"], required=True)
    parser.add_argument("--image", help="input image path (bulk/item/anchors)")
    parser.add_argument("--item", help="item name for --mode item")
    parser.add_argument("--backend", choices=["auto", "grounding_dino_sam", "contour"], default="auto")
    parser.add_argument("--weights-dir", default="weights")
    parser.add_argument("--bulk-json", help="bulk document for --mode merge")
    parser.add_argument("--anchors-json", help="anchors document for --mode merge")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    if args.mode == "merge":
        if not (args.bulk_json and args.anchors_json):
            parser.error("--mode merge needs --bulk-json and --anchors-json")
        document = merge_documents(
            json.loads(Path(args.bulk_json).read_text(encoding="utf-8")),
            json.loads(Path(args.anchors_json).read_text(encoding="utf-8")),
        )
    else:
        if not args.image:
            parser.error(f"--mode {args.mode} needs --image")
        document = build_document(args.image, args.mode, args.item, args.backend, args.weights_dir)

    Path(args.out).write_text(json.dumps(document, indent=2), encoding="utf-8")
    containers = len(document.get("containers", []))
    print(f"{document['image_id']}: {containers} containers -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
