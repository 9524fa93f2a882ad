"""Per-field token statistics and text-table rendering.

The default tokenizer is rule-based and dependency-free: each CJK ideograph
counts as one token, each maximal run of ASCII letters/digits counts as one
token, and everything else (whitespace, punctuation) separates tokens and
contributes zero. Quantiles use linear interpolation over the sorted values
(the widespread "type 7" convention: h = q*(n-1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence


class UnknownTokenizer(KeyError):
    pass


class EmptyInput(ValueError):
    pass


# Ideograph blocks: unified, extension A, compatibility, extensions B and up.
_CJK_RANGES = (
    (0x4E00, 0x9FFF),
    (0x3400, 0x4DBF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2FA1F),
)


def _is_cjk(cp: int) -> bool:
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def _is_latin_alnum(ch: str) -> bool:
    return ("a" <= ch <= "z") or ("A" <= ch <= "Z") or ("0" <= ch <= "9")


@dataclass(frozen=True)
class TokenizerSpec:
    id: str = "cjk_latin_default"
    rule: str = "cjk_latin_default"


DEFAULT_TOKENIZER = TokenizerSpec()

# External tokenizers register a callable text -> token count under an id.
_EXTERNAL: dict[str, Callable[[str], int]] = {}


def register_tokenizer(tokenizer_id: str, fn: Callable[[str], int]) -> None:
    _EXTERNAL[tokenizer_id] = fn


def _default_count(text: str) -> int:
    count = 0
    in_run = False
    for ch in text:
        if _is_latin_alnum(ch):
            if not in_run:
                count += 1
                in_run = True
            continue
        in_run = False
        if _is_cjk(ord(ch)):
            count += 1
    return count


def count_tokens(text: str, tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> int:
    if tokenizer.rule == "cjk_latin_default":
        return _default_count(text)
    if tokenizer.rule == "external":
        fn = _EXTERNAL.get(tokenizer.id)
        if fn is None:
            raise UnknownTokenizer(tokenizer.id)
        return fn(text)
    raise UnknownTokenizer(tokenizer.rule)


def quantile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile of ``values`` at ``q`` in [0, 1]."""
    if not values:
        raise EmptyInput("quantile of empty input")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    ordered = sorted(values)
    h = q * (len(ordered) - 1)
    lo = math.floor(h)
    if lo >= len(ordered) - 1:
        return float(ordered[-1])
    return ordered[lo] + (h - lo) * (ordered[lo + 1] - ordered[lo])


@dataclass(frozen=True)
class CorpusStats:
    """Token distribution of one field over one source (or the Total column)."""

    field: str
    source: str
    pair_count: int
    total_tokens: int
    max_tokens: int
    median: float
    q1: float
    q3: float

    def __post_init__(self) -> None:
        if not (self.q1 <= self.median <= self.q3 <= self.max_tokens):
            raise ValueError("expected q1 <= median <= q3 <= max_tokens")


def summarize_field(
    records: Iterable,
    selector: Callable[[object], str | None],
    *,
    field: str,
    source: str,
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER,
) -> CorpusStats:
    """Summarize token counts of ``selector(record)`` over records where present.

    ``selector`` returns None for records where the field is absent; those are
    excluded from pair_count.
    """
    counts = []
    for record in records:
        text = selector(record)
        if text is None:
            continue
        counts.append(count_tokens(text, tokenizer))
    if not counts:
        raise EmptyInput(f"no records carry field {field!r}")
    return CorpusStats(
        field=field,
        source=source,
        pair_count=len(counts),
        total_tokens=sum(counts),
        max_tokens=max(counts),
        median=quantile(counts, 0.5),
        q1=quantile(counts, 0.25),
        q3=quantile(counts, 0.75),
    )


# --- rendering ----------------------------------------------------------------

MISSING_CELL = "-"


def format_int(n: int) -> str:
    return f"{n:,}"


def format_total(n: int) -> str:
    # Floor to whole millions once the value reaches 1M (167,999,999 -> "167M").
    if n >= 1_000_000:
        return f"{n // 1_000_000}M"
    return f"{n:,}"


def format_quantile(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return format(x, "g")


def format_median_cell(median: float, q1: float, q3: float) -> str:
    return f"{format_quantile(median)} ({format_quantile(q1)}, {format_quantile(q3)})"


def _order_sources(sources: Iterable[str]) -> list[str]:
    ordered = []
    for s in sources:
        if s not in ordered:
            ordered.append(s)
    if "Total" in ordered:
        ordered.remove("Total")
        ordered.append("Total")
    return ordered


def render_stats_table(
    stats: Sequence[CorpusStats],
    pair_counts: dict[str, int],
    pair_label: str = "Image-Text pairs",
) -> str:
    """Render a per-source statistics table as aligned UTF-8 text.

    One column per source plus a trailing Total column (if present in the
    inputs); absent (source, field) combinations render as "-".
    """
    sources = _order_sources(list(pair_counts) + [s.source for s in stats])
    fields = []
    for s in stats:
        if s.field not in fields:
            fields.append(s.field)
    by_key = {(s.field, s.source): s for s in stats}

    rows: list[list[str]] = []
    rows.append([""] + sources)
    rows.append([f"{pair_label} #"] + [
        format_int(pair_counts[src]) if src in pair_counts else MISSING_CELL for src in sources
    ])
    for f in fields:
        cells = [by_key.get((f, src)) for src in sources]
        rows.append([f"{f} #"] + [
            format_total(c.total_tokens) if c else MISSING_CELL for c in cells
        ])
        rows.append([f"Max {f}"] + [
            format_int(c.max_tokens) if c else MISSING_CELL for c in cells
        ])
        rows.append([f"Median (Q1, Q3) {f}"] + [
            format_median_cell(c.median, c.q1, c.q3) if c else MISSING_CELL for c in cells
        ])

    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [cell.ljust(widths[i]) for i, cell in enumerate(row)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def stats_to_json(stats: Sequence[CorpusStats], pair_counts: dict[str, int]) -> dict:
    """Machine-readable counterpart of the text table, raw (unrounded) values."""
    return {
        "pair_counts": dict(pair_counts),
        "fields": [
            {
                "field": s.field,
                "source": s.source,
                "pair_count": s.pair_count,
                "total_tokens": s.total_tokens,
                "max_tokens": s.max_tokens,
                "median": s.median,
                "q1": s.q1,
                "q3": s.q3,
            }
            for s in stats
        ],
    }
