"""Record live API responses into tests/fixtures/figure1.json.

Trains small models, serves them with algsteps.server, drives the worked
transcript through real HTTP requests, and saves the exact response bodies.
Run from the repository root: python3 frontend/tools/record_fixtures.py
"""

import json
import random
import threading
import urllib.error
import urllib.request
from pathlib import Path

from algsteps.experiments import desk_config
from algsteps.generate import GenParams, MathOp, Outcome, gen_dataset
from algsteps.models import EncoderKind, Hyper, MethodKind, train
from algsteps.server import make_server

TRANSCRIPT = ["7x+9=7-x", "7x+9+x=7-x+x", "7x+9+x=7", "8x+9=7", "8x=7+9"]
BAD_INPUT = "7x++9=7"
OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "figure1.json"


def build_models():
    # same recipe as the acceptance suite's pinned classifier
    ok = gen_dataset(1000, GenParams(2, 2, 0.5), 0.0, random.Random(20))
    bugs = [s for s in gen_dataset(300, GenParams(2, 2, 0.5), 1.0,
                                   random.Random(21))
            if s.outcome == Outcome.BUG][:2000]
    cfg = desk_config(EncoderKind.TREE)
    op_model = train(MethodKind.TE_C, ok, [s.op.name for s in ok],
                     [op.name for op in MathOp], cfg=cfg,
                     hyper=Hyper(epochs=10), seed=4)
    fb_model = train(MethodKind.TE_C, bugs, [s.feedback for s in bugs],
                     sorted({s.feedback for s in bugs}), cfg=cfg,
                     hyper=Hyper(epochs=40), seed=4)
    return op_model, fb_model


def post(base, route, payload):
    req = urllib.request.Request(
        base + route, data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def main():
    op_model, fb_model = build_models()
    server = make_server(op_model, fb_model, host="127.0.0.1", port=0)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    base = "http://%s:%d" % server.server_address

    with urllib.request.urlopen(base + "/api/health") as resp:
        health = json.loads(resp.read())

    steps = []
    for before, after in zip(TRANSCRIPT, TRANSCRIPT[1:]):
        status, classify = post(base, "/api/classify",
                                {"before": before, "after": after})
        assert status == 200, (before, after, classify)
        feedback = None
        if not classify["valid"]:
            status, feedback = post(base, "/api/feedback",
                                    {"before": before, "after": after})
            assert status == 200, feedback
        steps.append({"before": before, "after": after,
                      "classify": classify, "feedback": feedback})

    status, body = post(base, "/api/classify",
                        {"before": TRANSCRIPT[-1], "after": BAD_INPUT})
    assert status == 422, (status, body)
    server.shutdown()

    fixture = {
        "health": health,
        "steps": steps,
        "parse_error": {"input": BAD_INPUT, "status": status, "body": body},
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=2) + "\n", encoding="utf-8")
    tops = [s["classify"]["operations"][0]["label"] for s in steps]
    print("recorded", OUT)
    print("top-1 per step:", tops)
    print("final step valid:", steps[-1]["classify"]["valid"])


if __name__ == "__main__":
    main()
