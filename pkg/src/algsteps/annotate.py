"""Transcript annotation: per-step operation predictions, oracle validity,
and feedback prediction for invalid steps."""

from dataclasses import dataclass

from .expr import ExprError, OracleInconclusive, ParseError, parse, print_expr
from .generate import MathOp, Step, step_validity_oracle

# a second operation label is shown only at or above this probability
SECOND_LABEL_MIN_PROB = 0.2


class TranscriptParseError(ParseError):
    """A transcript line failed to parse; cites the 1-based line number."""

    def __init__(self, lineno, original):
        Exception.__init__(self, f"line {lineno}: {original}")
        self.lineno = lineno
        self.offset = getattr(original, "offset", 0)


@dataclass
class Annotation:
    """One annotated step: top operations, oracle verdict, feedback ranking."""

    before: str
    after: str
    operations: list  # [(label, prob)] descending; one or two entries
    valid: bool
    feedback: list  # [(label, prob)] descending, or None


def _ranked(probs, classes):
    order = sorted(range(len(classes)), key=lambda i: (-probs[i], i))
    return [(classes[i], float(probs[i])) for i in order]


def check_validity(before, after, op_order=None, seed=0):
    """Oracle verdict: is (before -> after) a valid application of ANY operation?

    Operations are tried in op_order (a list of MathOp names, e.g. the model's
    predicted ranking) so the common case short-circuits early; inconclusive
    oracle runs count as not validated by that operation.
    """
    labels = op_order or [op.name for op in MathOp]
    for label in labels:
        if label not in MathOp.__members__:
            continue
        step = Step(before=before, after=after, op=MathOp[label])
        try:
            if step_validity_oracle(step, seed=seed):
                return True
        except OracleInconclusive:
            continue
    return False


def parse_transcript(lines):
    """(line_number, expression) pairs; blanks and '#' comments are skipped.

    Raises ParseError citing the 1-based line number of the offending line.
    """
    exprs = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        try:
            exprs.append((lineno, parse(text)))
        except ExprError as exc:
            raise TranscriptParseError(lineno, exc)
    return exprs


def annotate_transcript(lines, model, feedback_model=None, oracle_seed=0):
    """Annotate consecutive expression pairs of a solution transcript.

    Each step gets the model's top operation (and the runner-up when its
    probability clears SECOND_LABEL_MIN_PROB), an oracle validity verdict,
    and, when invalid and a feedback model is given, a feedback ranking.
    """
    exprs = parse_transcript(lines)
    if len(exprs) < 2:
        raise ValueError(
            f"transcript has {len(exprs)} expression(s); need at least two "
            "to form a step"
        )
    pairs = [(exprs[i][1], exprs[i + 1][1]) for i in range(len(exprs) - 1)]
    all_probs = model.predict_proba(pairs)
    annotations = []
    for (e1, e2), probs in zip(pairs, all_probs):
        ranked = _ranked(probs, model.classes)
        ops = ranked[:1]
        if len(ranked) > 1 and ranked[1][1] >= SECOND_LABEL_MIN_PROB:
            ops.append(ranked[1])
        valid = check_validity(
            e1, e2, [label for label, _ in ranked], seed=oracle_seed
        )
        feedback = None
        if not valid and feedback_model is not None:
            fb_probs = feedback_model.predict_proba([(e1, e2)])[0]
            feedback = _ranked(fb_probs, feedback_model.classes)
        annotations.append(
            Annotation(
                before=print_expr(e1),
                after=print_expr(e2),
                operations=ops,
                valid=valid,
                feedback=feedback,
            )
        )
    return annotations


def format_annotations(first_line, annotations):
    """Figure-style text rendering: one expression per line with its badge."""
    lines = [f"  1. {first_line}"]
    for i, a in enumerate(annotations, start=2):
        ops = " + ".join(f"{label}({prob:.2f})" for label, prob in a.operations)
        verdict = "valid" if a.valid else "INVALID"
        tail = f"{ops}  {verdict}"
        if not a.valid and a.feedback:
            label, prob = a.feedback[0]
            tail += f"  feedback: {label}({prob:.2f})"
        lines.append(f"  {i}. {a.after}    {tail}")
    return "\n".join(lines)
