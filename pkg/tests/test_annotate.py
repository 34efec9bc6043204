"""Tests for transcript annotation: pairing, validity, feedback, formatting."""

import random

import pytest

from algsteps.annotate import (
    SECOND_LABEL_MIN_PROB,
    annotate_transcript,
    check_validity,
    format_annotations,
    parse_transcript,
)
from algsteps.encoders import EncoderConfig, EncoderKind
from algsteps.expr import ParseError, parse
from algsteps.generate import BugKind, GenParams, MathOp, gen_dataset
from algsteps.models import Hyper, MethodKind, train

OPS = [op.name for op in MathOp]


def tiny_cfg():
    return EncoderConfig(
        kind=EncoderKind.TREE,
        symbol_embed_dim=8,
        hidden_dim=16,
        adapter_hidden=16,
        adapter_out_dim=8,
    )


@pytest.fixture(scope="module")
def op_model():
    steps = gen_dataset(3, GenParams(1, 1, 0.5), 0.0, random.Random(70))
    labels = [s.op.name for s in steps]
    return train(MethodKind.TE_C, steps, labels, OPS, cfg=tiny_cfg(),
                 hyper=Hyper(lr=0.01, batch=8, epochs=2), seed=0)


@pytest.fixture(scope="module")
def fb_model():
    steps = gen_dataset(6, GenParams(1, 1, 0.5), 0.5, random.Random(71))
    bugs = [s for s in steps if s.outcome.name == "BUG"]
    labels = [s.feedback for s in bugs]
    classes = sorted({k.name for k in BugKind})
    return train(MethodKind.TE_C, bugs, labels, classes, cfg=tiny_cfg(),
                 hyper=Hyper(lr=0.01, batch=8, epochs=2), seed=1)


TRANSCRIPT = ["x+5=9", "x+5-5=9-5", "x=4"]


def test_annotation_count(op_model):
    anns = annotate_transcript(TRANSCRIPT, op_model)
    assert len(anns) == len(TRANSCRIPT) - 1
    assert anns[0].before == "x+5=9"
    assert anns[0].after == "x+5-5=9-5"


def test_comments_and_blanks_skipped(op_model):
    lines = ["# student 17", "", "x+5=9", "  ", "x+5-5=9-5", "# done"]
    anns = annotate_transcript(lines, op_model)
    assert len(anns) == 1


def test_parse_error_cites_line(op_model):
    lines = ["x+5=9", "x+5-5=9-5", "x=)4("]
    with pytest.raises(ParseError, match="line 3"):
        annotate_transcript(lines, op_model)


def test_single_expression_usage_error(op_model):
    with pytest.raises(ValueError, match="at least two"):
        annotate_transcript(["x+5=9", "# comment"], op_model)


def test_probabilities_descending_and_bounded(op_model):
    for a in annotate_transcript(TRANSCRIPT, op_model):
        probs = [p for _, p in a.operations]
        assert all(0.0 <= p <= 1.0 for p in probs)
        assert probs == sorted(probs, reverse=True)
        assert 1 <= len(a.operations) <= 2
        if len(a.operations) == 2:
            assert a.operations[1][1] >= SECOND_LABEL_MIN_PROB


def test_identical_lines_invalid(op_model, fb_model):
    anns = annotate_transcript(["x+1=2", "x+1=2"], op_model, fb_model)
    assert anns[0].valid is False
    assert anns[0].feedback is not None
    fb_probs = [p for _, p in anns[0].feedback]
    assert fb_probs == sorted(fb_probs, reverse=True)
    assert len(anns[0].feedback) == 6


def test_invalid_without_feedback_model(op_model):
    anns = annotate_transcript(["x+1=2", "x+1=2"], op_model)
    assert anns[0].valid is False
    assert anns[0].feedback is None


def test_valid_step_oracle_verdict(op_model):
    anns = annotate_transcript(["x=1", "x+1=1+1"], op_model)
    assert anns[0].valid is True
    assert anns[0].feedback is None


def test_check_validity_direct():
    assert check_validity(parse("x=1"), parse("x+1=1+1")) is True
    assert check_validity(parse("x+5=9"), parse("x+5-5=9-5")) is True
    assert check_validity(parse("x=1"), parse("x=5")) is False
    assert check_validity(parse("x=1"), parse("x=1")) is False


def test_check_validity_respects_order():
    before, after = parse("x=1"), parse("x+1=1+1")
    assert check_validity(before, after, ["ADD_SIDE"]) is True
    assert check_validity(before, after, ["DISTRIBUTE"]) is False
    # unknown labels in the order are skipped, not errors
    assert check_validity(before, after, ["NOT_AN_OP", "ADD_SIDE"]) is True


def test_parse_transcript_line_numbers():
    pairs = parse_transcript(["# intro", "x=1", "", "x+1=1+1"])
    assert [ln for ln, _ in pairs] == [2, 4]


def test_format_annotations(op_model, fb_model):
    anns = annotate_transcript(["x+5=9", "x+5-5=9-5", "x+5-5=9-5"], op_model,
                               fb_model)
    text = format_annotations("x+5=9", anns)
    lines = text.split("\n")
    assert lines[0] == "  1. x+5=9"
    assert len(lines) == 3
    assert "valid" in lines[1]
    assert "INVALID" in lines[2] and "feedback:" in lines[2]
