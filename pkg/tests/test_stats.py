from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlcorpus.stats import (
    CorpusStats,
    EmptyInput,
    TokenizerSpec,
    UnknownTokenizer,
    count_tokens,
    format_median_cell,
    format_total,
    quantile,
    register_tokenizer,
    render_stats_table,
    summarize_field,
)


def test_count_tokens_empty():
    assert count_tokens("") == 0


def test_count_tokens_mixed_cjk_latin():
    # "CT" run + six ideographs
    assert count_tokens("CT扫描显示肿瘤") == 7


def test_count_tokens_latin_runs():
    assert count_tokens("X-ray image") == 3


def test_count_tokens_punctuation_only():
    assert count_tokens("，。!?  --") == 0


def test_count_tokens_digits_in_runs():
    assert count_tokens("T2加权像") == 4  # "T2" + 3 ideographs


def test_unknown_tokenizer():
    with pytest.raises(UnknownTokenizer):
        count_tokens("x", TokenizerSpec(id="nope", rule="external"))


def test_external_tokenizer_registration():
    register_tokenizer("whitespace", lambda s: len(s.split()))
    assert count_tokens("a b c", TokenizerSpec(id="whitespace", rule="external")) == 3


def test_quantile_singleton():
    for q in (0.0, 0.25, 0.5, 1.0):
        assert quantile([5], q) == 5


def test_quantile_interpolation():
    values = [1, 2, 3, 4]
    assert quantile(values, 0.25) == 1.75
    assert quantile(values, 0.5) == 2.5
    assert quantile(values, 0.75) == 3.25


def test_quantile_sorts_first():
    assert quantile([3, 1, 2], 0.5) == 2


def test_quantile_empty():
    with pytest.raises(EmptyInput):
        quantile([], 0.5)


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=200))
def test_quantile_extremes_and_monotonicity(values):
    assert quantile(values, 0.0) == min(values)
    assert quantile(values, 1.0) == max(values)
    qs = [quantile(values, q) for q in (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)]
    assert qs == sorted(qs)


def _texts_with_counts(counts: list[int]) -> list[str]:
    return [" ".join(["tok"] * n) if n else "" for n in counts]


def test_summarize_field_hand_example():
    records = _texts_with_counts([10, 20, 30, 40])
    result = summarize_field(records, lambda t: t, field="C tokens", source="pmc_casereport")
    assert result.pair_count == 4
    assert result.total_tokens == 100
    assert result.max_tokens == 40
    assert result.median == 25
    assert result.q1 == 17.5
    assert result.q3 == 32.5


def test_summarize_field_singleton():
    result = summarize_field(["a b c d e f g"], lambda t: t, field="I tokens", source="x")
    assert result.total_tokens == 7
    assert result.median == result.q1 == result.q3 == 7


def test_summarize_field_absent_excluded():
    records = [("a", "x y z"), ("b", None), ("c", "p q")]
    result = summarize_field(records, lambda r: r[1], field="F", source="s")
    assert result.pair_count == 2
    assert result.total_tokens == 5


def test_summarize_field_empty():
    with pytest.raises(EmptyInput):
        summarize_field([("a", None)], lambda r: r[1], field="F", source="s")


def test_summarize_field_permutation_invariant():
    texts = _texts_with_counts(list(range(1, 60)))
    shuffled = texts[:]
    random.Random(3).shuffle(shuffled)
    a = summarize_field(texts, lambda t: t, field="F", source="s")
    assert a == summarize_field(shuffled, lambda t: t, field="F", source="s")


def test_corpus_stats_ordering_invariant():
    with pytest.raises(ValueError):
        CorpusStats(field="F", source="s", pair_count=1, total_tokens=5, max_tokens=4,
                    median=5, q1=1, q3=2)


def test_format_median_cell():
    assert format_median_cell(435, 211, 757) == "435 (211, 757)"
    assert format_median_cell(17.5, 2, 3.25) == "17.5 (2, 3.25)"


def test_format_total_floors_millions():
    assert format_total(167_234_567) == "167M"
    assert format_total(167_999_999) == "167M"
    assert format_total(999_999) == "999,999"


def test_render_table_missing_cells_and_total_last():
    stats = [
        CorpusStats("C tokens", "pmc_casereport", 10, 2_300_000, 2576, 435, 211, 757),
        CorpusStats("C tokens", "Total", 10, 2_300_000, 2576, 435, 211, 757),
        CorpusStats("I tokens", "pmc_casereport", 10, 900, 90, 59, 41, 83),
        CorpusStats("I tokens", "pmc_oa", 5, 500, 70, 60, 44, 66),
        CorpusStats("I tokens", "Total", 15, 1400, 90, 59.5, 42, 75),
    ]
    pair_counts = {"pmc_casereport": 10, "pmc_oa": 5, "Total": 15}
    table = render_stats_table(stats, pair_counts)
    lines = table.splitlines()
    header = lines[0].split()
    assert header == ["pmc_casereport", "pmc_oa", "Total"]
    # PMC-OA carries no context field.
    c_row = next(l for l in lines if l.startswith("C tokens #"))
    assert c_row.split()[-2] == "-"
    assert "435 (211, 757)" in table
    assert "2M" in table
