"""Canonical record types for the corpus pipeline and their validation.

Every value is an immutable dataclass; validation is a pure function that
returns the list of violated invariants (empty list = valid). Serialization
is one JSON object per line (UTF-8, fixed key order) so files are streamable
and diff-able.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

SCHEMA_VERSION = 1

# Visible, grep-able sentinel for the image position in a dialog turn.
IMAGE_PLACEHOLDER = "<image>"

SOURCES = ("pmc_oa", "pmc_casereport", "pmc_vqa")
TEXT_ROLES = ("context", "inline_description", "question_answer")
PAIR_CATEGORIES = ("context", "description")
TASKS = ("caption", "vqa")
TURN_ROLES = ("human", "assistant")

# text_role -> AlignmentPair category for the non-QA roles
CATEGORY_BY_ROLE = {"context": "context", "inline_description": "description"}


@dataclass(frozen=True)
class QA:
    question: str
    answer: str


@dataclass(frozen=True)
class SourceRecord:
    """One raw image-set/text unit from a source corpus."""

    id: str
    source: str
    image_paths: tuple[str, ...]
    text_role: str
    text: str = ""
    qa: QA | None = None


@dataclass(frozen=True)
class AlignmentPair:
    """(composite image, translated text) sample for the alignment subset."""

    id: str
    image_ref: str
    text_zh: str
    category: str


@dataclass(frozen=True)
class InstructionPair:
    """(composite image, translated question/answer) sample for instruction tuning."""

    id: str
    image_ref: str
    question_zh: str
    answer_zh: str


@dataclass(frozen=True)
class DialogTurn:
    role: str
    text: str


@dataclass(frozen=True)
class DialogSample:
    """A templated human/assistant conversation with one image placeholder."""

    id: str
    image_ref: str
    turns: tuple[DialogTurn, ...]
    task: str
    template_id: int


def validate_source_record(record: SourceRecord) -> list[str]:
    """Return the violated SourceRecord invariants; empty list means valid.

    Uniqueness of ``id`` is a manifest-level invariant and is enforced by the
    manifest reader, not here.
    """
    violations = []
    if not record.id:
        violations.append("id non-empty")
    if record.source not in SOURCES:
        violations.append(f"source in {SOURCES}")
    if len(record.image_paths) < 1:
        violations.append("image_paths length >= 1")
    if record.text_role not in TEXT_ROLES:
        violations.append(f"text_role in {TEXT_ROLES}")
    qa_ok = record.qa is not None and bool(record.qa.question) and bool(record.qa.answer)
    if record.text_role == "question_answer":
        if record.qa is None:
            violations.append("qa required")
        elif not qa_ok:
            violations.append("qa question and answer non-empty")
        if record.text:
            violations.append("text must be empty for question_answer records")
    else:
        if not record.text:
            violations.append("text non-empty")
        if record.qa is not None:
            violations.append("qa only allowed for question_answer records")
    return violations


def validate_dialog(sample: DialogSample) -> list[str]:
    """Return the violated DialogSample invariants; empty list means valid."""
    violations = []
    turns = sample.turns
    if len(turns) < 2 or len(turns) % 2 != 0:
        violations.append("turns even-length and >= 2")
    for i, turn in enumerate(turns):
        expected = TURN_ROLES[i % 2]
        if turn.role != expected:
            violations.append("turns alternate human/assistant starting with human")
            break
    placeholder_total = sum(t.text.count(IMAGE_PLACEHOLDER) for t in turns)
    if placeholder_total != 1 or (turns and IMAGE_PLACEHOLDER not in turns[0].text):
        violations.append("placeholder count = 1, in first human turn")
    if any(t.role == "assistant" and not t.text for t in turns):
        violations.append("assistant turns non-empty")
    if sample.task not in TASKS:
        violations.append(f"task in {TASKS}")
    return violations


# --- JSONL codecs ------------------------------------------------------------
#
# Key order is fixed by the dict literals below; encode(decode(line)) is
# byte-identical for any line produced by these encoders.


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def encode_source_record(record: SourceRecord) -> str:
    obj = {
        "schema_version": SCHEMA_VERSION,
        "id": record.id,
        "source": record.source,
        "image_paths": list(record.image_paths),
        "text_role": record.text_role,
        "text": record.text,
        "qa": None if record.qa is None else {"question": record.qa.question, "answer": record.qa.answer},
    }
    return _dumps(obj)


def decode_source_record(line: str) -> SourceRecord:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record line must be a JSON object")
    qa_obj = obj.get("qa")
    qa = None
    if qa_obj is not None:
        if not isinstance(qa_obj, dict):
            raise ValueError("qa must be an object")
        qa = QA(question=_req_str(qa_obj, "question"), answer=_req_str(qa_obj, "answer"))
    paths = obj.get("image_paths")
    if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
        raise ValueError("image_paths must be a list of strings")
    return SourceRecord(
        id=_req_str(obj, "id"),
        source=_req_str(obj, "source"),
        image_paths=tuple(paths),
        text_role=_req_str(obj, "text_role"),
        text=_req_str(obj, "text", default=""),
        qa=qa,
    )


def encode_alignment_pair(pair: AlignmentPair) -> str:
    return _dumps(
        {
            "schema_version": SCHEMA_VERSION,
            "id": pair.id,
            "image_ref": pair.image_ref,
            "text_zh": pair.text_zh,
            "category": pair.category,
        }
    )


def decode_alignment_pair(line: str) -> AlignmentPair:
    obj = json.loads(line)
    return AlignmentPair(
        id=_req_str(obj, "id"),
        image_ref=_req_str(obj, "image_ref"),
        text_zh=_req_str(obj, "text_zh"),
        category=_req_str(obj, "category"),
    )


def encode_instruction_pair(pair: InstructionPair) -> str:
    return _dumps(
        {
            "schema_version": SCHEMA_VERSION,
            "id": pair.id,
            "image_ref": pair.image_ref,
            "question_zh": pair.question_zh,
            "answer_zh": pair.answer_zh,
        }
    )


def decode_instruction_pair(line: str) -> InstructionPair:
    obj = json.loads(line)
    return InstructionPair(
        id=_req_str(obj, "id"),
        image_ref=_req_str(obj, "image_ref"),
        question_zh=_req_str(obj, "question_zh"),
        answer_zh=_req_str(obj, "answer_zh"),
    )


def encode_dialog_sample(sample: DialogSample) -> str:
    return _dumps(
        {
            "schema_version": SCHEMA_VERSION,
            "id": sample.id,
            "image_ref": sample.image_ref,
            "turns": [{"role": t.role, "text": t.text} for t in sample.turns],
            "task": sample.task,
            "template_id": sample.template_id,
        }
    )


def decode_dialog_sample(line: str) -> DialogSample:
    obj = json.loads(line)
    turns_obj = obj.get("turns")
    if not isinstance(turns_obj, list):
        raise ValueError("turns must be a list")
    turns = tuple(DialogTurn(role=_req_str(t, "role"), text=_req_str(t, "text")) for t in turns_obj)
    template_id = obj.get("template_id")
    if not isinstance(template_id, int):
        raise ValueError("template_id must be an integer")
    return DialogSample(
        id=_req_str(obj, "id"),
        image_ref=_req_str(obj, "image_ref"),
        turns=turns,
        task=_req_str(obj, "task"),
        template_id=template_id,
    )


_MISSING = object()


def _req_str(obj: dict, key: str, default=_MISSING) -> str:
    value = obj.get(key, default)
    if value is _MISSING:
        raise ValueError(f"missing key: {key}")
    if not isinstance(value, str):
        raise ValueError(f"key {key} must be a string")
    return value
