"""Manifest and image ingestion with a skip-and-log error budget.

Real scraped corpora contain dirt, so malformed or invalid manifest lines are
skipped and counted instead of aborting the read; the stream fails only when
the skipped fraction exceeds the configured budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from PIL import Image, UnidentifiedImageError

from .records import SourceRecord, decode_source_record, validate_source_record

DEFAULT_ERROR_BUDGET = 0.01

SUPPORTED_FORMATS = ("PNG", "JPEG")


class BudgetExceeded(Exception):
    def __init__(self, skipped: int, total: int):
        super().__init__(f"skipped {skipped} of {total} manifest lines, over budget")
        self.skipped = skipped
        self.total = total


class DecodeError(Exception):
    pass


@dataclass(frozen=True)
class SkipEntry:
    line_no: int
    reason: str
    detail: str = ""
    id: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {"line_no": self.line_no, "reason": self.reason, "detail": self.detail, "id": self.id},
            ensure_ascii=False,
        )


class ManifestReader:
    """Single-pass, single-consumer stream of validated SourceRecords.

    Iteration yields records in file order; ``skips``, ``total`` and ``kept``
    are populated as the stream advances. Raises BudgetExceeded at end of
    stream if skipped/total exceeds the budget. Memory use stays bounded by
    one line regardless of manifest length.
    """

    def __init__(self, path: str | Path, error_budget: float = DEFAULT_ERROR_BUDGET):
        if not 0.0 <= error_budget <= 1.0:
            raise ValueError("error_budget must be in [0, 1]")
        self.path = Path(path)
        if not self.path.is_file():
            raise FileNotFoundError(str(self.path))
        self.error_budget = error_budget
        self.skips: list[SkipEntry] = []
        self.total = 0
        self.kept = 0

    def __iter__(self) -> Iterator[SourceRecord]:
        seen_ids: set[str] = set()
        with open(self.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                self.total += 1
                try:
                    record = decode_source_record(line)
                except (json.JSONDecodeError, ValueError) as exc:
                    self.skips.append(SkipEntry(line_no, "malformed", str(exc), _peek_id(line)))
                    continue
                violations = validate_source_record(record)
                if violations:
                    self.skips.append(SkipEntry(line_no, "invalid", "; ".join(violations), record.id or None))
                    continue
                if record.id in seen_ids:
                    self.skips.append(SkipEntry(line_no, "duplicate_id", record.id, record.id))
                    continue
                seen_ids.add(record.id)
                self.kept += 1
                yield record
        if self.total and len(self.skips) / self.total > self.error_budget:
            raise BudgetExceeded(len(self.skips), self.total)


def _peek_id(line: str) -> str | None:
    """Best-effort id extraction from a malformed manifest line."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return None
    if isinstance(obj, dict) and isinstance(obj.get("id"), str) and obj["id"]:
        return obj["id"]
    return None


def read_manifest(path: str | Path, error_budget: float = DEFAULT_ERROR_BUDGET) -> ManifestReader:
    return ManifestReader(path, error_budget)


def load_image(path: str | Path) -> Image.Image:
    """Decode a PNG/JPEG file into an 8-bit RGB image.

    Grayscale and alpha inputs are converted to RGB. Other container formats
    and corrupt files raise DecodeError.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    try:
        with Image.open(p) as img:
            if img.format not in SUPPORTED_FORMATS:
                raise DecodeError(f"unsupported format: {img.format}")
            return img.convert("RGB")
    except UnidentifiedImageError as exc:
        raise DecodeError(f"not a decodable image: {exc}") from exc
    except OSError as exc:
        raise DecodeError(f"decode failed: {exc}") from exc
