"""Prompt builders for every querying strategy.

Templates live as text resources under ``resources/prompts`` so their exact
bytes are reviewable; builders only substitute the item name and the
container description lines.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .errors import EmptySceneError

STRATEGIES = (
    "structured",
    "instructional",
    "story",
    "bbox_gemini",
    "bbox_openai_style",
    "gdino",
    "gdino_no_item",
    "kosmos",
)


@dataclass(frozen=True)
class PromptBundle:
    strategy: str
    system_text: str | None
    user_text: str


def _template(name: str) -> str:
    return (
        resources.files("storagebench.resources.prompts")
        .joinpath(name)
        .read_text(encoding="utf-8")
    )


def _bullet_lines(descriptions: list[str]) -> str:
    return "\n".join(f"- {desc}" for desc in descriptions)


def _require_descriptions(descriptions: list[str]) -> None:
    if not descriptions:
        raise EmptySceneError("no container descriptions to prompt with")


def build_structured(item: str, descriptions: list[str]) -> PromptBundle:
    """System prompt with four worked examples; user prompt with the task instance."""
    _require_descriptions(descriptions)
    user = f"Item: {item.strip()}\nContainers:\n" + _bullet_lines(descriptions)
    return PromptBundle("structured", _template("structured_system.txt"), user)


def build_instructional(items: list[str], descriptions: list[str]) -> PromptBundle:
    """Service-robot framing; supports asking about several items at once."""
    _require_descriptions(descriptions)
    if not items:
        raise ValueError("instructional prompt needs at least one item")
    text = _template("instructional.txt").format(
        container_lines=_bullet_lines(descriptions),
        item_list=", ".join(i.strip() for i in items),
    )
    return PromptBundle("instructional", None, text)


def build_story(item: str, descriptions: list[str]) -> PromptBundle:
    """Narrative completion framing; the item is lowercased into the story."""
    _require_descriptions(descriptions)
    text = _template("story.txt").format(
        item_lower=item.strip().lower(),
        container_lines=_bullet_lines(descriptions),
    )
    return PromptBundle("story", None, text)


def build_bbox_prompt(item: str, flavor: str) -> PromptBundle:
    """Image+text prompts asking for raw box coordinates.

    The ``gemini`` flavor falls back to [0, 0, 0, 0], the ``openai_style``
    flavor to an empty list.
    """
    if flavor == "gemini":
        return PromptBundle(
            "bbox_gemini", None, _template("bbox_gemini.txt").format(item=item.strip())
        )
    if flavor == "openai_style":
        return PromptBundle(
            "bbox_openai_style", None, _template("bbox_openai.txt").format(item=item.strip())
        )
    raise ValueError(f"unknown bbox prompt flavor {flavor!r}")


def build_gdino_prompt(item: str | None = None) -> str:
    if item is None:
        return "drawer . cabinet door"
    return f"drawer for {item} . cabinet door for {item}"


def build_kosmos_prompt(item: str) -> str:
    if not item or not item.strip():
        raise ValueError("kosmos prompt needs an item")
    return _template("kosmos.txt").format(item=item.strip())
