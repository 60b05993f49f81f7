"""Per-image container table: identities, labels, anchors, and serialization.

The detections-file contract (one JSON document per image):

    {"image_id": str, "width": int, "height": int,
     "containers": [{"label": str, "confidence": float, "polygon": [[x, y], ...]}],
     "anchors":    [{"label": str, "confidence": float, "polygon": [[x, y], ...]}],
     "countertop": [[x, y], ...] | null}
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .config import FeatureConfig
from .errors import EmptySceneError, InvalidGeometryError, SchemaError
from .geometry import BBox, Direction, Polygon, polygon_area


class ContainerLabel(str, Enum):
    DRAWER = "drawer"
    CABINET_DOOR = "cabinet_door"

    @property
    def words(self) -> str:
        return "drawer" if self is ContainerLabel.DRAWER else "cabinet door"


class AspectClass(str, Enum):
    WIDER_THAN_TALL = "wider-than-tall"
    TALLER_THAN_WIDE = "taller-than-wide"
    SQUARE_LIKE = "square-like"


class CountertopRelation(str, Enum):
    ABOVE = "above"
    BELOW = "below"
    UNKNOWN = "unknown"


@dataclass
class Detection:
    raw_label: str
    confidence: float
    polygon: Polygon
    bbox: BBox | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise SchemaError(f"confidence {self.confidence} outside [0, 1]", field="confidence")
        derived = self.polygon.bbox
        if self.bbox is None:
            self.bbox = derived
        elif (
            self.bbox.x_min > derived.x_min
            or self.bbox.y_min > derived.y_min
            or self.bbox.x_max < derived.x_max
            or self.bbox.y_max < derived.y_max
        ):
            raise SchemaError("bbox does not enclose polygon", field="bbox")


@dataclass
class Anchor:
    label: str
    bbox: BBox
    confidence: float


@dataclass
class AnchorRelation:
    anchor_label: str
    direction: Direction
    distance: float
    is_close: bool


@dataclass
class Container:
    global_id: int
    local_id: int
    raw_label: str
    label: ContainerLabel | None  # None while ambiguous
    confidence: float
    polygon: Polygon
    bbox: BBox
    aspect_class: AspectClass | None = None
    countertop_relation: CountertopRelation = CountertopRelation.UNKNOWN
    neighbor_local_ids: set[int] = field(default_factory=set)
    anchor_relations: list[AnchorRelation] = field(default_factory=list)
    closest_to_anchors: set[str] = field(default_factory=set)

    @property
    def width(self) -> float:
        return self.bbox.width

    @property
    def height(self) -> float:
        return self.bbox.height

    @property
    def is_ambiguous(self) -> bool:
        return self.label is None


@dataclass
class ContainerTable:
    image_id: str
    image_width: int
    image_height: int
    containers: list[Container]
    anchors: list[Anchor]
    countertop: Polygon | None = None

    def container_by_local_id(self, local_id: int) -> Container | None:
        if 1 <= local_id <= len(self.containers):
            return self.containers[local_id - 1]
        return None


def parse_raw_label(raw: str) -> ContainerLabel | None:
    """Map a detector phrase to a concrete label, or None when ambiguous.

    Phrases naming both container types (e.g. "drawer cabinet door") are
    ambiguous and resolved later from neighboring containers.
    """
    text = raw.lower()
    has_drawer = "drawer" in text
    has_cabinet = "cabinet" in text or "door" in text
    if has_drawer and has_cabinet:
        return None
    if has_drawer:
        return ContainerLabel.DRAWER
    if has_cabinet:
        return ContainerLabel.CABINET_DOOR
    raise SchemaError(f"unknown container label {raw!r}", field="label")


def first_token_label(raw: str) -> ContainerLabel:
    """Fallback for unresolvable ambiguity: the phrase's leading token wins."""
    return ContainerLabel.DRAWER if raw.lower().split()[0] == "drawer" else ContainerLabel.CABINET_DOOR


def assemble_table(
    detections: list[Detection],
    anchors: list[Detection],
    image_id: str,
    image_width: int,
    image_height: int,
    countertop: Polygon | None = None,
    global_id_start: int = 1,
    config: FeatureConfig | None = None,
) -> ContainerTable:
    """Build the container table for one image.

    Containers are sorted top-to-bottom then left-to-right by bbox corner and
    numbered local_id 1..K in that order; global ids follow ingestion order
    starting at ``global_id_start``.
    """
    cfg = config or FeatureConfig()
    if image_width <= 0 or image_height <= 0:
        raise SchemaError(f"image dimensions {image_width}x{image_height} must be positive")
    if not detections:
        raise EmptySceneError(f"image {image_id!r} has no container detections")

    for det in detections:
        if polygon_area(det.polygon) <= 0.0:
            raise InvalidGeometryError(
                f"zero-area container polygon in image {image_id!r}"
            )

    order = sorted(
        range(len(detections)),
        key=lambda i: (detections[i].bbox.y_min, detections[i].bbox.x_min),
    )
    containers = []
    for local_id, det_index in enumerate(order, start=1):
        det = detections[det_index]
        containers.append(
            Container(
                global_id=global_id_start + det_index,
                local_id=local_id,
                raw_label=det.raw_label,
                label=parse_raw_label(det.raw_label),
                confidence=det.confidence,
                polygon=det.polygon,
                bbox=det.bbox,
            )
        )

    anchor_objs = []
    for det in anchors:
        if det.raw_label not in cfg.anchor_vocabulary:
            raise SchemaError(f"unknown anchor label {det.raw_label!r}", field="anchors.label")
        anchor_objs.append(Anchor(label=det.raw_label, bbox=det.bbox, confidence=det.confidence))

    return ContainerTable(
        image_id=image_id,
        image_width=image_width,
        image_height=image_height,
        containers=containers,
        anchors=anchor_objs,
        countertop=countertop,
    )


def resolve_ambiguous_labels(table: ContainerTable) -> ContainerTable:
    """Give every ambiguous container a concrete label.

    Majority label among already-concrete neighbors on the same countertop
    side; no neighbors or a tied vote falls back to the raw phrase's first
    token. Requires neighbor sets and countertop relations to be populated.
    """
    by_id = {c.local_id: c for c in table.containers}
    for container in table.containers:
        if not container.is_ambiguous:
            continue
        votes = Counter()
        for neighbor_id in container.neighbor_local_ids:
            neighbor = by_id[neighbor_id]
            if neighbor.label is None:
                continue
            if neighbor.countertop_relation != container.countertop_relation:
                continue
            votes[neighbor.label] += 1
        ranked = votes.most_common(2)
        if len(ranked) == 1 or (len(ranked) == 2 and ranked[0][1] > ranked[1][1]):
            container.label = ranked[0][0]
        else:
            container.label = first_token_label(container.raw_label)
    return table


# ---------------------------------------------------------------------------
# serialization


def _detection_from_dict(entry: dict, where: str) -> Detection:
    try:
        polygon = Polygon.from_points(entry["polygon"])
    except KeyError:
        raise SchemaError("missing polygon", field=f"{where}.polygon") from None
    except (InvalidGeometryError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad polygon: {exc}", field=f"{where}.polygon") from None
    for key in ("label", "confidence"):
        if key not in entry:
            raise SchemaError(f"missing {key}", field=f"{where}.{key}")
    return Detection(
        raw_label=str(entry["label"]),
        confidence=float(entry["confidence"]),
        polygon=polygon,
    )


def detections_from_dict(
    doc: dict,
    global_id_start: int = 1,
    config: FeatureConfig | None = None,
) -> ContainerTable:
    """Parse one detections document into an (unfeaturized) ContainerTable."""
    for key in ("image_id", "width", "height", "containers"):
        if key not in doc:
            raise SchemaError(f"missing {key}", field=key)
    containers = [
        _detection_from_dict(entry, f"containers[{i}]")
        for i, entry in enumerate(doc["containers"])
    ]
    anchors = [
        _detection_from_dict(entry, f"anchors[{i}]")
        for i, entry in enumerate(doc.get("anchors", []))
    ]
    countertop = None
    if doc.get("countertop"):
        try:
            countertop = Polygon.from_points(doc["countertop"])
        except (InvalidGeometryError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad countertop polygon: {exc}", field="countertop") from None
    return assemble_table(
        containers,
        anchors,
        image_id=str(doc["image_id"]),
        image_width=int(doc["width"]),
        image_height=int(doc["height"]),
        countertop=countertop,
        global_id_start=global_id_start,
        config=config,
    )


def table_to_dict(table: ContainerTable) -> dict:
    return {
        "image_id": table.image_id,
        "width": table.image_width,
        "height": table.image_height,
        "countertop": table.countertop.to_list() if table.countertop else None,
        "anchors": [
            {"label": a.label, "confidence": a.confidence, "bbox": a.bbox.to_list()}
            for a in table.anchors
        ],
        "containers": [
            {
                "global_id": c.global_id,
                "local_id": c.local_id,
                "raw_label": c.raw_label,
                "label": c.label.value if c.label else None,
                "confidence": c.confidence,
                "polygon": c.polygon.to_list(),
                "bbox": c.bbox.to_list(),
                "aspect_class": c.aspect_class.value if c.aspect_class else None,
                "countertop_relation": c.countertop_relation.value,
                "neighbor_local_ids": sorted(c.neighbor_local_ids),
                "anchor_relations": [
                    {
                        "anchor_label": rel.anchor_label,
                        "direction": rel.direction.value,
                        "distance": rel.distance,
                        "is_close": rel.is_close,
                    }
                    for rel in c.anchor_relations
                ],
                "closest_to_anchors": sorted(c.closest_to_anchors),
            }
            for c in table.containers
        ],
    }


def table_from_dict(doc: dict) -> ContainerTable:
    containers = []
    for entry in doc["containers"]:
        containers.append(
            Container(
                global_id=entry["global_id"],
                local_id=entry["local_id"],
                raw_label=entry["raw_label"],
                label=ContainerLabel(entry["label"]) if entry["label"] else None,
                confidence=entry["confidence"],
                polygon=Polygon.from_points(entry["polygon"]),
                bbox=BBox(*entry["bbox"]),
                aspect_class=AspectClass(entry["aspect_class"]) if entry["aspect_class"] else None,
                countertop_relation=CountertopRelation(entry["countertop_relation"]),
                neighbor_local_ids=set(entry["neighbor_local_ids"]),
                anchor_relations=[
                    AnchorRelation(
                        anchor_label=rel["anchor_label"],
                        direction=Direction(rel["direction"]),
                        distance=rel["distance"],
                        is_close=rel["is_close"],
                    )
                    for rel in entry["anchor_relations"]
                ],
                closest_to_anchors=set(entry["closest_to_anchors"]),
            )
        )
    return ContainerTable(
        image_id=doc["image_id"],
        image_width=doc["width"],
        image_height=doc["height"],
        containers=containers,
        anchors=[
            Anchor(label=a["label"], bbox=BBox(*a["bbox"]), confidence=a["confidence"])
            for a in doc["anchors"]
        ],
        countertop=Polygon.from_points(doc["countertop"]) if doc.get("countertop") else None,
    )
