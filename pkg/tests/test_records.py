from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlcorpus.records import (
    QA,
    AlignmentPair,
    DialogSample,
    DialogTurn,
    InstructionPair,
    SourceRecord,
    decode_alignment_pair,
    decode_dialog_sample,
    decode_instruction_pair,
    decode_source_record,
    encode_alignment_pair,
    encode_dialog_sample,
    encode_instruction_pair,
    encode_source_record,
    validate_dialog,
    validate_source_record,
)


def make_record(**overrides) -> SourceRecord:
    base = dict(
        id="r1",
        source="pmc_oa",
        image_paths=("img/a.png",),
        text_role="context",
        text="a liver lesion is visible",
        qa=None,
    )
    base.update(overrides)
    return SourceRecord(**base)


def test_valid_context_record():
    assert validate_source_record(make_record()) == []


def test_empty_image_paths_violation():
    violations = validate_source_record(make_record(image_paths=()))
    assert "image_paths length >= 1" in violations


def test_qa_required_for_question_answer():
    violations = validate_source_record(make_record(text_role="question_answer", text=""))
    assert "qa required" in violations


def test_text_and_qa_both_present_rejected():
    record = make_record(qa=QA("what?", "a tumor"))
    assert any("qa only allowed" in v for v in validate_source_record(record))


def test_neither_text_nor_qa_rejected():
    assert "text non-empty" in validate_source_record(make_record(text=""))


def test_qa_with_empty_answer_rejected():
    record = make_record(text_role="question_answer", text="", qa=QA("what?", ""))
    assert any("non-empty" in v for v in validate_source_record(record))


def test_unknown_source_and_role():
    violations = validate_source_record(make_record(source="nope", text_role="nope"))
    assert len(violations) == 2


def make_dialog(**overrides) -> DialogSample:
    base = dict(
        id="d1",
        image_ref="images/d1.png",
        turns=(DialogTurn("human", "<image>\n描述一下"), DialogTurn("assistant", "肝脏病变")),
        task="caption",
        template_id=3,
    )
    base.update(overrides)
    return DialogSample(**base)


def test_valid_dialog():
    assert validate_dialog(make_dialog()) == []


def test_double_placeholder_rejected():
    sample = make_dialog(turns=(DialogTurn("human", "<image><image>"), DialogTurn("assistant", "好的描述")))
    assert any("placeholder" in v for v in validate_dialog(sample))


def test_odd_turns_rejected():
    sample = make_dialog(turns=(
        DialogTurn("human", "<image>描述"),
        DialogTurn("assistant", "描述文本"),
        DialogTurn("human", "再说一次"),
    ))
    assert any("even-length" in v for v in validate_dialog(sample))


def test_alternation_enforced():
    sample = make_dialog(turns=(DialogTurn("assistant", "<image>好"), DialogTurn("human", "嗯")))
    assert any("alternate" in v for v in validate_dialog(sample))


def test_empty_assistant_turn_rejected():
    sample = make_dialog(turns=(DialogTurn("human", "<image>描述"), DialogTurn("assistant", "")))
    assert any("assistant turns non-empty" in v for v in validate_dialog(sample))


def test_placeholder_must_be_in_first_turn():
    sample = make_dialog(turns=(DialogTurn("human", "描述"), DialogTurn("assistant", "<image>文本")))
    assert any("first human turn" in v for v in validate_dialog(sample))


# --- serialization round-trips -------------------------------------------------

text_st = st.text(min_size=0, max_size=40)
nonempty_st = st.text(min_size=1, max_size=40)
id_st = st.text(alphabet=st.characters(min_codepoint=33, max_codepoint=126), min_size=1, max_size=12)


@given(
    rec_id=id_st,
    source=st.sampled_from(["pmc_oa", "pmc_casereport", "pmc_vqa"]),
    paths=st.lists(nonempty_st, min_size=1, max_size=4),
    role=st.sampled_from(["context", "inline_description"]),
    text=nonempty_st,
)
def test_source_record_roundtrip(rec_id, source, paths, role, text):
    record = SourceRecord(rec_id, source, tuple(paths), role, text)
    line = encode_source_record(record)
    assert decode_source_record(line) == record
    assert encode_source_record(decode_source_record(line)) == line


@given(rec_id=id_st, q=nonempty_st, a=nonempty_st)
def test_qa_record_roundtrip(rec_id, q, a):
    record = SourceRecord(rec_id, "pmc_vqa", ("x.png",), "question_answer", "", QA(q, a))
    line = encode_source_record(record)
    assert decode_source_record(line) == record
    assert encode_source_record(decode_source_record(line)) == line


@given(rec_id=id_st, text=nonempty_st, category=st.sampled_from(["context", "description"]))
def test_alignment_pair_roundtrip(rec_id, text, category):
    pair = AlignmentPair(rec_id, f"images/{rec_id}.png", text, category)
    line = encode_alignment_pair(pair)
    assert decode_alignment_pair(line) == pair
    assert encode_alignment_pair(decode_alignment_pair(line)) == line


@given(rec_id=id_st, q=nonempty_st, a=nonempty_st)
def test_instruction_pair_roundtrip(rec_id, q, a):
    pair = InstructionPair(rec_id, f"images/{rec_id}.png", q, a)
    line = encode_instruction_pair(pair)
    assert decode_instruction_pair(line) == pair
    assert encode_instruction_pair(decode_instruction_pair(line)) == line


@given(rec_id=id_st, human=text_st, answer=nonempty_st, task=st.sampled_from(["caption", "vqa"]),
       template_id=st.integers(min_value=0, max_value=10**6))
def test_dialog_roundtrip(rec_id, human, answer, task, template_id):
    sample = DialogSample(
        rec_id, f"images/{rec_id}.png",
        (DialogTurn("human", "<image>" + human), DialogTurn("assistant", answer)),
        task, template_id,
    )
    line = encode_dialog_sample(sample)
    assert decode_dialog_sample(line) == sample
    assert encode_dialog_sample(decode_dialog_sample(line)) == line


def test_decode_rejects_wrong_types():
    with pytest.raises(ValueError):
        decode_source_record('{"id": 5, "source": "pmc_oa", "image_paths": ["a"], "text_role": "context", "text": "x"}')
    with pytest.raises(ValueError):
        decode_source_record('["not", "an", "object"]')
    with pytest.raises(ValueError):
        decode_dialog_sample('{"id": "a", "image_ref": "b", "turns": [], "task": "caption", "template_id": "x"}')
