"""Step-log ingestion: TSV round-trip, outcome subsets, folds, feedback grouping."""

import random
from dataclasses import dataclass, field, replace

from .expr import ExprError, parse, print_expr
from .generate import MathOp, Outcome, Step

COLUMNS = (
    "step_id",
    "expr_before",
    "expr_after",
    "operation",
    "outcome",
    "difficulty",
    "feedback",
)


class FileError(Exception):
    """The TSV file cannot be read."""


class HeaderMismatch(Exception):
    """The TSV header row is not the pinned column set."""


class TooFewRecords(Exception):
    """Not enough records (or folds) for a k-fold plan."""


class UnmappedLabel(Exception):
    """Feedback labels missing from the grouping map, under strict mode."""


@dataclass(frozen=True)
class StepRecord:
    """The TSV row form of a step."""

    step_id: str
    expr_before: str
    expr_after: str
    operation: str
    outcome: str
    difficulty: str
    feedback: str


@dataclass(frozen=True)
class Rejection:
    """One rejected TSV row with its file line number."""

    line: int
    reason: str
    row: str


def record_from_step(s):
    """Serialize a generated Step into its TSV row form."""
    return StepRecord(
        step_id=s.step_id,
        expr_before=print_expr(s.before),
        expr_after=print_expr(s.after),
        operation=s.op.name,
        outcome=s.outcome.name,
        difficulty=s.difficulty,
        feedback=s.feedback,
    )


def step_from_record(r):
    """Parse a StepRecord back into a Step with expression trees."""
    return Step(
        before=parse(r.expr_before),
        after=parse(r.expr_after),
        op=MathOp[r.operation],
        outcome=Outcome[r.outcome],
        step_id=r.step_id,
        difficulty=r.difficulty,
        feedback=r.feedback,
    )


def write_tsv(path, items):
    """Write records (or Steps) as UTF-8 TSV with LF endings, no quoting."""
    lines = ["\t".join(COLUMNS)]
    for item in items:
        r = item if isinstance(item, StepRecord) else record_from_step(item)
        lines.append(
            "\t".join(
                (r.step_id, r.expr_before, r.expr_after, r.operation,
                 r.outcome, r.difficulty, r.feedback)
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _validate_row(fields):
    """Reason string if the row is invalid, else None."""
    if len(fields) != len(COLUMNS):
        return f"wrong field count: {len(fields)} != {len(COLUMNS)}"
    _, before, after, operation, outcome, _, _ = fields
    if operation not in MathOp.__members__:
        return f"UnknownOperation: {operation!r}"
    if outcome not in Outcome.__members__:
        return f"UnknownOutcome: {outcome!r}"
    for col, text in (("expr_before", before), ("expr_after", after)):
        try:
            parse(text)
        except ExprError as exc:
            return f"{col} does not parse: {exc}"
    return None


def load_tsv(path):
    """Load step records; invalid rows are rejected with line numbers cited."""
    try:
        with open(path, "r", encoding="utf-8", newline="\n") as f:
            text = f.read()
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc}")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != "\t".join(COLUMNS):
        got = lines[0] if lines else ""
        raise HeaderMismatch(f"expected header {COLUMNS}, got {got!r}")
    records = []
    rejections = []
    for lineno, row in enumerate(lines[1:], start=2):
        fields = row.split("\t")
        reason = _validate_row(fields)
        if reason is None:
            records.append(StepRecord(*fields))
        else:
            rejections.append(Rejection(line=lineno, reason=reason, row=row))
    return records, rejections


# ---------------------------------------------------------------- partition


@dataclass
class Partition:
    """Outcome subsets plus per-difficulty splits of the OK subset."""

    ok: list
    error: list
    bug: list
    by_difficulty: dict


def partition(records):
    """Split records by outcome; difficulty bands split the OK subset only."""
    ok, error, bug = [], [], []
    by_difficulty = {}
    for r in records:
        if r.outcome == "OK":
            ok.append(r)
            by_difficulty.setdefault(r.difficulty, []).append(r)
        elif r.outcome == "ERROR":
            error.append(r)
        else:
            bug.append(r)
    return Partition(ok=ok, error=error, bug=bug, by_difficulty=by_difficulty)


# ---------------------------------------------------------------- folds


@dataclass(frozen=True)
class FoldPlan:
    """A deterministic stratified k-fold assignment of record indices."""

    k: int
    assignment: tuple
    seed: int

    def fold_indices(self, i):
        return [j for j, f in enumerate(self.assignment) if f == i]

    def train_test(self, i):
        train = [j for j, f in enumerate(self.assignment) if f != i]
        return train, self.fold_indices(i)


def kfold(records, k, seed, key=None):
    """Stratified folds by operation label; sizes differ by at most one.

    Each class's shuffled members are dealt onto a fold counter that runs on
    across classes, so folds balance both per class and globally. `key`
    overrides the stratification label (default: the operation field).
    """
    n = len(records)
    if k < 2 or n < k:
        raise TooFewRecords(f"cannot make {k} folds from {n} records")
    if key is None:
        key = lambda r: r.operation
    groups = {}
    for idx, r in enumerate(records):
        groups.setdefault(key(r), []).append(idx)
    rng = random.Random(seed)
    assignment = [0] * n
    counter = 0
    for label in sorted(groups):
        members = groups[label]
        rng.shuffle(members)
        for idx in members:
            assignment[idx] = counter % k
            counter += 1
    return FoldPlan(k=k, assignment=tuple(assignment), seed=seed)


# ---------------------------------------------------------------- grouping


@dataclass
class GroupReport:
    """Post-grouping label census: counts, unmapped labels, singletons."""

    counts: dict
    unmapped: list
    singletons: list = field(default_factory=list)


def group_feedback(records, mapping, strict=False):
    """Apply a raw -> grouped feedback label map; unmapped labels pass through.

    Records with empty feedback are untouched and uncounted. Unmapped labels
    are listed in the report (and raise under strict=True); labels that occur
    exactly once after grouping are flagged as singletons.
    """
    grouped = []
    counts = {}
    unmapped = []
    for r in records:
        if not r.feedback:
            grouped.append(r)
            continue
        if r.feedback in mapping:
            new_label = mapping[r.feedback]
        else:
            if r.feedback not in unmapped:
                unmapped.append(r.feedback)
            new_label = r.feedback
        grouped.append(
            r if new_label == r.feedback else replace(r, feedback=new_label)
        )
        counts[new_label] = counts.get(new_label, 0) + 1
    if strict and unmapped:
        raise UnmappedLabel(f"unmapped feedback labels: {unmapped}")
    singletons = [lab for lab, c in counts.items() if c == 1]
    return grouped, GroupReport(counts=counts, unmapped=unmapped, singletons=singletons)
