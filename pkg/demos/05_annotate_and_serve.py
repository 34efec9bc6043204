"""Annotate a worked derivation and query the same model over HTTP."""

import json
import random
import threading
import urllib.request

from algsteps.annotate import annotate_transcript, format_annotations
from algsteps.experiments import desk_config
from algsteps.generate import GenParams, MathOp, Outcome, gen_dataset
from algsteps.models import EncoderKind, Hyper, MethodKind, train
from algsteps.server import make_server

# one model for operations, one for feedback on buggy steps
rng = random.Random(2)
steps = gen_dataset(150, GenParams(2, 2, 0.5), 1.0, rng)
ok = [s for s in steps if s.outcome == Outcome.OK]
bugs = [s for s in steps if s.outcome == Outcome.BUG]

cfg = desk_config(EncoderKind.TREE)
op_model = train(MethodKind.TE_C, ok, [s.op.name for s in ok],
                 [op.name for op in MathOp], cfg=cfg,
                 hyper=Hyper(epochs=12), seed=2)
fb_model = train(MethodKind.TE_C, bugs, [s.feedback for s in bugs],
                 sorted({s.feedback for s in bugs}), cfg=cfg,
                 hyper=Hyper(epochs=12), seed=2)

# the final line is corrupted on purpose: +9 should have been subtracted
transcript = [
    "7x+9=7-x",
    "7x+9+x=7-x+x",
    "7x+9+x=7",
    "8x+9=7",
    "8x=7+9",
]
annotations = annotate_transcript(transcript, op_model, fb_model)
print(format_annotations(transcript[0], annotations))

# the HTTP service exposes the same checks as JSON endpoints
server = make_server(op_model, fb_model, host="127.0.0.1", port=0)
thread = threading.Thread(target=server.serve_forever, daemon=True)
thread.start()
host, port = server.server_address


def post(route, payload):
    req = urllib.request.Request(
        f"http://{host}:{port}{route}",
        data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


body = post("/api/classify", {"before": "x=1", "after": "x+1=1+1"})
top = body["operations"][0]
print(f"\nPOST /api/classify x=1 -> x+1=1+1: "
      f"{top['label']} ({top['prob']:.2f}), valid={body['valid']}")

body = post("/api/feedback", {"before": "8x+9=7", "after": "8x=7+9"})
print(f"POST /api/feedback 8x+9=7 -> 8x=7+9: "
      f"{body['feedback'][0]['label']}")

server.shutdown()
