"""Populate each container's spatial features: aspect, countertop side,
neighbors, and relations to anchor objects."""

from __future__ import annotations

import math

from .config import FeatureConfig
from .geometry import bbox_gap, centroid, direction_and_distance
from .scene import (
    AnchorRelation,
    AspectClass,
    Container,
    ContainerTable,
    CountertopRelation,
    resolve_ambiguous_labels,
)


def compute_aspect(container: Container, config: FeatureConfig | None = None) -> AspectClass:
    cfg = config or FeatureConfig()
    ratio = container.width / container.height
    if ratio > cfg.aspect_wide:
        return AspectClass.WIDER_THAN_TALL
    if ratio < cfg.aspect_tall:
        return AspectClass.TALLER_THAN_WIDE
    return AspectClass.SQUARE_LIKE


def countertop_relation(container: Container, countertop) -> CountertopRelation:
    """Side of the countertop the container sits on (screen coords, y down).

    The container centroid is compared against the countertop polygon's
    vertical span; a centroid inside the span falls back to whichever side
    holds more of the container's bbox area.
    """
    if countertop is None:
        return CountertopRelation.UNKNOWN
    span_min = min(p.y for p in countertop.vertices)
    span_max = max(p.y for p in countertop.vertices)
    cy = centroid(container.polygon).y
    if cy < span_min:
        return CountertopRelation.ABOVE
    if cy > span_max:
        return CountertopRelation.BELOW
    above_area = max(0.0, span_min - container.bbox.y_min) * container.width
    below_area = max(0.0, container.bbox.y_max - span_max) * container.width
    return CountertopRelation.ABOVE if above_area > below_area else CountertopRelation.BELOW


def find_neighbors(table: ContainerTable, config: FeatureConfig | None = None) -> ContainerTable:
    """Mark container pairs whose bbox gap is within a fraction of the image
    diagonal as mutual neighbors."""
    cfg = config or FeatureConfig()
    threshold = cfg.neighbor_gap_fraction * math.hypot(table.image_width, table.image_height)
    containers = table.containers
    for c in containers:
        c.neighbor_local_ids = set()
    for i, a in enumerate(containers):
        for b in containers[i + 1 :]:
            if bbox_gap(a.bbox, b.bbox) <= threshold:
                a.neighbor_local_ids.add(b.local_id)
                b.neighbor_local_ids.add(a.local_id)
    return table


def anchor_relations(table: ContainerTable, config: FeatureConfig | None = None) -> ContainerTable:
    """Relate every container to every anchor and assign each anchor to its
    single closest container (distance, then local_id, breaks ties).

    An AnchorRelation records where the container sits relative to the
    anchor, so the verbalizer can say "to the left of the sink". Coincident
    centers (distance 0) produce no relation but still count for closeness.
    """
    cfg = config or FeatureConfig()
    close_threshold = cfg.close_fraction * math.hypot(table.image_width, table.image_height)
    for c in table.containers:
        c.anchor_relations = []
        c.closest_to_anchors = set()
    for anchor in table.anchors:
        anchor_center = anchor.bbox.center
        best: Container | None = None
        best_distance = math.inf
        for container in table.containers:
            center = centroid(container.polygon)
            distance = math.dist(anchor_center, center)
            if distance > 0.0:
                direction, _ = direction_and_distance(anchor_center, center)
                container.anchor_relations.append(
                    AnchorRelation(
                        anchor_label=anchor.label,
                        direction=direction,
                        distance=distance,
                        is_close=distance <= close_threshold,
                    )
                )
            if distance < best_distance or (
                distance == best_distance and best is not None and container.local_id < best.local_id
            ):
                best = container
                best_distance = distance
        if best is not None:
            best.closest_to_anchors.add(anchor.label)
    return table


def featurize(table: ContainerTable, config: FeatureConfig | None = None) -> ContainerTable:
    """Run the full feature pass. Neighbors and countertop sides are computed
    before label resolution, which needs both."""
    cfg = config or FeatureConfig()
    for container in table.containers:
        container.aspect_class = compute_aspect(container, cfg)
        container.countertop_relation = countertop_relation(container, table.countertop)
    find_neighbors(table, cfg)
    resolve_ambiguous_labels(table)
    anchor_relations(table, cfg)
    return table
