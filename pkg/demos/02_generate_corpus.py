"""Generate a labeled step corpus, inspect it, and write it as TSV."""

import random
from collections import Counter

from algsteps.data import load_tsv, partition, write_tsv
from algsteps.expr import print_expr
from algsteps.generate import GenParams, gen_dataset, step_validity_oracle

# entropy drives constant size, degree the polynomial degree, flip the
# chance of mirroring each template; together they set the difficulty band
params = GenParams(entropy=2, degree=1, flip=0.5)
rng = random.Random(7)
steps = gen_dataset(n_per_op=20, p=params, bug_fraction=0.3, rng=rng)

print(f"{len(steps)} steps, band {steps[0].difficulty}")
print(Counter(s.outcome.name for s in steps))
print(Counter(s.op.name for s in steps if s.outcome.name == "OK"))

# a few rows, the way a grader would see them
for s in steps[:3]:
    print(f"  {print_expr(s.before):>24}  ->  {print_expr(s.after):<24} {s.op.name}")

# every OK step passes the validity oracle, every BUG step fails it
ok = [s for s in steps if s.outcome.name == "OK"]
bug = [s for s in steps if s.outcome.name == "BUG"]
print("oracle accepts OK:  ", all(step_validity_oracle(s) for s in ok))
print("oracle rejects BUG: ", not any(step_validity_oracle(s) for s in bug))
for s in bug[:3]:
    print(f"  buggy: {print_expr(s.before)} -> {print_expr(s.after)}  [{s.feedback}]")

# round-trip through the TSV interchange format
write_tsv("/tmp/demo_steps.tsv", steps)
records, rejections = load_tsv("/tmp/demo_steps.tsv")
print(f"reloaded {len(records)} records, {len(rejections)} rejected")
parts = partition(records)
print("partition:", {k: len(v) for k, v in
                     [("ok", parts.ok), ("bug", parts.bug), ("error", parts.error)]})
