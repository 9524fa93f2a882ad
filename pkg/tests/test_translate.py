from __future__ import annotations

import time

import pytest

from vlcorpus.records import QA, AlignmentPair, InstructionPair, SourceRecord
from vlcorpus.translate import (
    BackendConfig,
    BackendExhausted,
    BackendRefusal,
    Discard,
    InvalidInput,
    MockBackend,
    QcPolicy,
    TranslationCache,
    cache_key,
    qc_source,
    qc_translation,
    translate_record,
    translate_text,
)

FAST = BackendConfig(requests_per_second=100_000.0)
POLICY = QcPolicy()


def test_qc_source_brief_discarded():
    result = qc_source("short caption here now", POLICY)  # 4 tokens
    assert isinstance(result, Discard)
    assert result.reason == "TooBrief"


def test_qc_source_long_kept():
    text = " ".join(["finding"] * 50)
    assert qc_source(text, POLICY) is None


def test_qc_source_empty_discarded():
    assert qc_source("", POLICY).reason == "TooBrief"


def test_qc_translation_too_short():
    assert qc_translation("好", POLICY).reason == "TooShort"


def test_qc_translation_not_translated():
    result = qc_translation("The CT scan shows a mass", POLICY)
    assert result.reason == "NotTranslated"


def test_qc_translation_kept():
    assert qc_translation("CT扫描显示右肾区域肿瘤", POLICY) is None


def test_qc_translation_refusal_marker():
    assert qc_translation("抱歉，我不能帮助处理这个请求呢。", POLICY).reason == "Refusal"


def test_translate_text_miss_then_hit():
    backend = MockBackend(FAST, mapping={"chest X-ray": "胸部X光片"})
    cache = TranslationCache()
    assert translate_text("chest X-ray", backend, cache) == ("胸部X光片", "miss")
    assert backend.calls == 1
    assert translate_text("chest X-ray", backend, cache) == ("胸部X光片", "hit")
    assert backend.calls == 1


def test_translate_text_empty_input():
    with pytest.raises(InvalidInput):
        translate_text("", MockBackend(FAST), TranslationCache())


def test_retries_then_success():
    backend = MockBackend(FAST, transient_failures={"flaky": 2})
    text, outcome = translate_text("flaky", backend, TranslationCache())
    assert outcome == "miss"
    assert backend.attempts == 3
    assert backend.calls == 1


def test_retries_exhausted():
    config = BackendConfig(max_retries=1, requests_per_second=100_000.0)
    backend = MockBackend(config, transient_failures={"flaky": 5})
    with pytest.raises(BackendExhausted):
        translate_text("flaky", backend, TranslationCache())
    assert backend.attempts == 2
    assert backend.calls == 0


def test_refusal_raises_and_is_cached():
    backend = MockBackend(FAST, refuse={"bad text"})
    cache = TranslationCache()
    with pytest.raises(BackendRefusal):
        translate_text("bad text", backend, cache, refusal_markers=("抱歉",))
    assert backend.calls == 1
    # The refusal response is remembered: no second backend call.
    with pytest.raises(BackendRefusal):
        translate_text("bad text", backend, cache, refusal_markers=("抱歉",))
    assert backend.calls == 1


def test_identical_inputs_identical_outputs():
    backend = MockBackend(FAST)
    a, _ = translate_text("some unmapped finding", backend, TranslationCache())
    b, _ = translate_text("some unmapped finding", MockBackend(FAST), TranslationCache())
    assert a == b


def test_cache_key_distinguishes_all_parts():
    base = cache_key("t", "v1", "m")
    assert cache_key("t2", "v1", "m") != base
    assert cache_key("t", "v2", "m") != base
    assert cache_key("t", "v1", "m2") != base
    assert len(base) == 64  # 256-bit hex


def test_cache_persists_append_only(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = TranslationCache(path)
    cache.put("k1", "v1")
    cache.put("k2", "v2")
    assert len(path.read_text().splitlines()) == 2
    reloaded = TranslationCache(path)
    assert reloaded.get("k1") == "v1"
    assert reloaded.get("k2") == "v2"


def test_rate_limiter_spaces_calls():
    config = BackendConfig(requests_per_second=50.0)
    backend = MockBackend(config)
    start = time.monotonic()
    for i in range(3):
        backend.complete(f"text {i}")
    assert time.monotonic() - start >= 2 / 50


def _caption_record(text: str, role: str = "inline_description") -> SourceRecord:
    return SourceRecord("r1", "pmc_oa", ("a.png",), role, text)


def _qa_record(question: str, answer: str) -> SourceRecord:
    return SourceRecord("q1", "pmc_vqa", ("a.png",), "question_answer", "", QA(question, answer))


LONG = "the radiograph demonstrates a large opacity in the left lower lobe region"


def test_translate_record_caption():
    backend = MockBackend(FAST, mapping={LONG: "X光片显示左下肺大片阴影"})
    result = translate_record(_caption_record(LONG), backend, TranslationCache(), POLICY, "images/r1.png")
    assert isinstance(result, AlignmentPair)
    assert result.text_zh == "X光片显示左下肺大片阴影"
    assert result.category == "description"
    assert result.image_ref == "images/r1.png"


def test_translate_record_context_category():
    backend = MockBackend(FAST)
    result = translate_record(_caption_record(LONG, role="context"), backend, TranslationCache(),
                              POLICY, "images/r1.png")
    assert isinstance(result, AlignmentPair)
    assert result.category == "context"


def test_translate_record_qa_two_calls():
    q = "what abnormality is visible in the left lung field of this chest radiograph"
    a = "there is a large opacity in the left lower lobe consistent with pneumonia"
    backend = MockBackend(FAST)
    cache = TranslationCache()
    result = translate_record(_qa_record(q, a), backend, cache, POLICY, "images/q1.png")
    assert isinstance(result, InstructionPair)
    assert backend.calls == 2
    assert len(cache) == 2


def test_translate_record_refusal_discards():
    q = "what abnormality is visible in the left lung field of this chest radiograph"
    a = "describe the malignant finding in detail for the record of this patient"
    backend = MockBackend(FAST, refuse={a})
    result = translate_record(_qa_record(q, a), backend, TranslationCache(), POLICY, "x.png")
    assert isinstance(result, Discard)
    assert result.reason == "Refusal"
    assert backend.calls == 2  # question succeeded, answer refused


def test_translate_record_brief_source_makes_no_calls():
    backend = MockBackend(FAST)
    result = translate_record(_caption_record("four token caption text"), backend, TranslationCache(),
                              POLICY, "x.png")
    assert isinstance(result, Discard)
    assert result.reason == "TooBrief"
    assert backend.calls == 0
    assert backend.attempts == 0


def test_cache_soundness_over_sequence():
    # Calls equal the number of distinct texts that passed source QC.
    texts = [LONG, LONG, "too short", LONG + " two", LONG + " two"]
    backend = MockBackend(FAST)
    cache = TranslationCache()
    for t in texts:
        record = _caption_record(t)
        translate_record(record, backend, cache, POLICY, "x.png")
    assert backend.calls == 2


def test_warm_cache_second_pass_zero_calls():
    records = [_caption_record(LONG + f" variant {i}") for i in range(5)]
    backend = MockBackend(FAST)
    cache = TranslationCache()
    first = [translate_record(r, backend, cache, POLICY, "x.png") for r in records]
    assert backend.calls == 5
    second = [translate_record(r, backend, cache, POLICY, "x.png") for r in records]
    assert backend.calls == 5
    assert first == second
