"""Prompt templates and dialog rendering.

A template is selected per record by hashing (record_id, seed), so selection
is order-independent, resumable, and parallelizable; changing the seed
reshuffles assignments across the corpus.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .records import IMAGE_PLACEHOLDER, TASKS, DialogSample, DialogTurn

QUESTION_SLOT = "{question}"

DEFAULT_ASSET = "templates.jsonl"


class EmptySet(Exception):
    pass


class TaskMismatch(Exception):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: int
    task: str
    body: str

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"task in {TASKS}")
        if self.body.count(IMAGE_PLACEHOLDER) != 1:
            raise ValueError(f"body must contain {IMAGE_PLACEHOLDER} exactly once")
        slots = self.body.count(QUESTION_SLOT)
        if self.task == "vqa" and slots != 1:
            raise ValueError(f"vqa body must contain {QUESTION_SLOT} exactly once")
        if self.task == "caption" and slots != 0:
            raise ValueError(f"caption body must not contain {QUESTION_SLOT}")


class TemplateSet:
    """Ordered, immutable task -> templates mapping with unique ids per task."""

    def __init__(self, templates: list[PromptTemplate]):
        by_task: dict[str, list[PromptTemplate]] = {}
        for t in templates:
            bucket = by_task.setdefault(t.task, [])
            if any(prev.template_id == t.template_id for prev in bucket):
                raise ValueError(f"duplicate template_id {t.template_id} for task {t.task}")
            bucket.append(t)
        self._by_task = {task: tuple(ts) for task, ts in by_task.items()}

    def for_task(self, task: str) -> tuple[PromptTemplate, ...]:
        return self._by_task.get(task, ())

    @classmethod
    def load(cls, path: str | Path | None = None) -> "TemplateSet":
        """Load from a template asset file (JSONL); None loads the shipped set."""
        if path is None:
            text = resources.files("vlcorpus.assets").joinpath(DEFAULT_ASSET).read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        templates = []
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            templates.append(
                PromptTemplate(template_id=obj["template_id"], task=obj["task"], body=obj["body"])
            )
        if not templates:
            raise EmptySet("template asset is empty")
        return cls(templates)


def _stable_hash64(record_id: str, seed: int) -> int:
    digest = hashlib.blake2b(f"{record_id}\x00{seed}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def select_template(task: str, record_id: str, seed: int, template_set: TemplateSet) -> PromptTemplate:
    """Pick the template for a record: stable across runs and platforms."""
    templates = template_set.for_task(task)
    if not templates:
        raise EmptySet(f"no templates for task {task!r}")
    return templates[_stable_hash64(record_id, seed) % len(templates)]


def _forbid_placeholder(*texts: str) -> None:
    # Pair text carrying the sentinel would give the dialog two image slots.
    for text in texts:
        if IMAGE_PLACEHOLDER in text:
            raise ValueError(f"pair text must not contain {IMAGE_PLACEHOLDER}")


def render_alignment_dialog(pair, template: PromptTemplate) -> DialogSample:
    if template.task != "caption":
        raise TaskMismatch(f"expected caption template, got {template.task}")
    _forbid_placeholder(pair.text_zh)
    return DialogSample(
        id=pair.id,
        image_ref=pair.image_ref,
        turns=(DialogTurn("human", template.body), DialogTurn("assistant", pair.text_zh)),
        task="caption",
        template_id=template.template_id,
    )


def render_instruction_dialog(pair, template: PromptTemplate) -> DialogSample:
    if template.task != "vqa":
        raise TaskMismatch(f"expected vqa template, got {template.task}")
    _forbid_placeholder(pair.question_zh, pair.answer_zh)
    # Single-pass substitution: a literal "{question}" inside the question
    # text is embedded verbatim, never re-expanded.
    human = template.body.replace(QUESTION_SLOT, pair.question_zh, 1)
    return DialogSample(
        id=pair.id,
        image_ref=pair.image_ref,
        turns=(DialogTurn("human", human), DialogTurn("assistant", pair.answer_zh)),
        task="vqa",
        template_id=template.template_id,
    )
