"""Train a tree-encoder operation classifier and read its predictions."""

import random

from algsteps.experiments import desk_config
from algsteps.generate import GenParams, MathOp, gen_dataset
from algsteps.models import EncoderKind, Hyper, MethodKind, train

# a small corpus: 70 steps per operation, one difficulty band
rng = random.Random(0)
steps = gen_dataset(150, GenParams(2, 1, 0.5), 0.0, rng)
labels = [s.op.name for s in steps]
classes = [op.name for op in MathOp]

# hold out every fifth step for a quick sanity score
test = steps[::5]
test_labels = labels[::5]
train_steps = [s for i, s in enumerate(steps) if i % 5]
train_labels = [l for i, l in enumerate(labels) if i % 5]

model = train(
    MethodKind.TE_C, train_steps, train_labels, classes,
    cfg=desk_config(EncoderKind.TREE),
    hyper=Hyper(epochs=12),
    seed=0,
)
print("loss curve:", " ".join(f"{v:.3f}" for v in model.loss_curve))

preds = model.predict(test)
acc = sum(p == t for p, t in zip(preds, test_labels)) / len(test)
print(f"held-out accuracy: {acc:.3f} on {len(test)} steps")

# per-class probabilities for one canonical step
from algsteps.expr import parse
from algsteps.generate import Outcome, Step

probe = Step(before=parse("x=1"), after=parse("x+1=1+1"),
             op=MathOp.ADD_SIDE, outcome=Outcome.OK)
proba = model.predict_proba([probe])[0]
for cls, p in sorted(zip(model.classes, proba), key=lambda t: -t[1]):
    print(f"  {cls:<12} {p:.3f}")
