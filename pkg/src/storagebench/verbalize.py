"""Render container features as the one-line descriptions used in prompts.

Qualitative phrases only; the only digits in a description are local ids.
"""

from __future__ import annotations

from .errors import EmptySceneError, UnresolvedLabelError
from .geometry import Direction
from .scene import AspectClass, Container, ContainerTable, CountertopRelation

_DIRECTION_PHRASES = {
    Direction.LEFT_OF: "to the left of",
    Direction.RIGHT_OF: "to the right of",
    Direction.ABOVE: "above",
    Direction.BELOW: "below",
    Direction.TOP_LEFT_OF: "at the top-left of",
    Direction.TOP_RIGHT_OF: "at the top-right of",
    Direction.BOTTOM_LEFT_OF: "at the bottom-left of",
    Direction.BOTTOM_RIGHT_OF: "at the bottom-right of",
}

_ASPECT_PHRASES = {
    AspectClass.WIDER_THAN_TALL: "wider than tall",
    AspectClass.TALLER_THAN_WIDE: "taller than wide",
}


def _join_phrases(phrases: list[str]) -> str:
    if len(phrases) == 1:
        return phrases[0]
    return ", ".join(phrases[:-1]) + ", and " + phrases[-1]


def describe_container(container: Container) -> str:
    """One description line, e.g.
    "Container 1: cabinet door below the countertop, located to the right of the dishwasher."

    Mentions an anchor when the container is close to it or is its closest
    container. Square-like aspect is left implicit; the non-square classes
    are spelled out.
    """
    if container.label is None:
        raise UnresolvedLabelError(
            f"container {container.local_id} still has ambiguous label {container.raw_label!r}"
        )
    head = container.label.words
    if container.aspect_class in _ASPECT_PHRASES:
        head += f" {_ASPECT_PHRASES[container.aspect_class]}"
    if container.countertop_relation is not CountertopRelation.UNKNOWN:
        head += f" {container.countertop_relation.value} the countertop"

    anchor_phrases = []
    for rel in container.anchor_relations:  # already in table-anchor order
        if rel.is_close or rel.anchor_label in container.closest_to_anchors:
            anchor_phrases.append(f"{_DIRECTION_PHRASES[rel.direction]} the {rel.anchor_label}")

    line = f"Container {container.local_id}: {head}"
    if anchor_phrases:
        line += f", located {_join_phrases(anchor_phrases)}"
    return line + "."


def describe_scene(table: ContainerTable) -> list[str]:
    """Description lines for every container, in local_id order."""
    if not table.containers:
        raise EmptySceneError(f"image {table.image_id!r} has no containers to describe")
    ordered = sorted(table.containers, key=lambda c: c.local_id)
    return [describe_container(c) for c in ordered]
