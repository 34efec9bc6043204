"""Learn translation vectors for each operation and look at their geometry."""

import random

import numpy as np

from algsteps.experiments import desk_config, export_operation_geometry
from algsteps.generate import GenParams, MathOp, gen_dataset
from algsteps.models import EncoderKind, Hyper, MethodKind, train

# TE+TransE learns one vector h per operation so that e2 ~ e1 + h
rng = random.Random(1)
steps = gen_dataset(60, GenParams(2, 1, 0.5), 0.0, rng)
model = train(
    MethodKind.TE_TRANSE,
    steps,
    [s.op.name for s in steps],
    [op.name for op in MathOp],
    cfg=desk_config(EncoderKind.TREE),
    hyper=Hyper(epochs=6),
    seed=1,
)

geom = export_operation_geometry(model)
dist = np.asarray(geom.distances)
names = [c[:7] for c in geom.classes]

print("pairwise distances between operation vectors")
print("        " + " ".join(f"{n:>7}" for n in names))
for name, row in zip(names, dist):
    print(f"{name:>7} " + " ".join(f"{v:7.2f}" for v in row))

# the two COMBINE operations rewrite one side in place; the four *_SIDE
# operations edit both sides, so they tend to sit closer to each other
mask = ~np.eye(len(names), dtype=bool)
i, j = divmod(int(np.argmin(np.where(mask, dist, np.inf))), len(names))
print(f"\nclosest pair: {geom.classes[i]} ~ {geom.classes[j]} "
      f"at {dist[i, j]:.2f}")
print(f"mean off-diagonal distance: {dist[mask].mean():.2f}")
