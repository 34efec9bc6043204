"""Tests for the HTTP JSON inference service."""

import json
import random
import threading
import urllib.error
import urllib.request

import pytest

from algsteps.encoders import EncoderConfig, EncoderKind
from algsteps.generate import BugKind, GenParams, MathOp, gen_dataset
from algsteps.models import Hyper, MethodKind, train
from algsteps.server import make_server

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
    steps = gen_dataset(3, GenParams(1, 1, 0.5), 0.0, random.Random(80))
    labels = [s.op.name for s in steps]
    return train(MethodKind.TE_C, steps, labels, OPS, cfg=tiny_cfg(),
                 hyper=Hyper(lr=0.01, batch=8, epochs=2), seed=0)


@pytest.fixture(scope="module")
def fb_model():
    steps = gen_dataset(6, GenParams(1, 1, 0.5), 0.5, random.Random(81))
    bugs = [s for s in steps if s.outcome.name == "BUG"]
    labels = [s.feedback for s in bugs]
    classes = sorted({k.name for k in BugKind})
    return train(MethodKind.TE_C, bugs, labels, classes, cfg=tiny_cfg(),
                 hyper=Hyper(lr=0.01, batch=8, epochs=2), seed=1)


def _spawn(model, feedback_model=None):
    httpd = make_server(model, feedback_model, host="127.0.0.1", port=0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    return httpd, f"http://127.0.0.1:{httpd.server_address[1]}"


@pytest.fixture(scope="module")
def api(op_model, fb_model):
    httpd, base = _spawn(op_model, fb_model)
    yield base
    httpd.shutdown()
    httpd.server_close()


@pytest.fixture(scope="module")
def api_no_feedback(op_model):
    httpd, base = _spawn(op_model, None)
    yield base
    httpd.shutdown()
    httpd.server_close()


def _get(url):
    try:
        with urllib.request.urlopen(url) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()


def _post_raw(url, data):
    req = urllib.request.Request(
        url, data=data, headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()


def _post(url, obj):
    status, body = _post_raw(url, json.dumps(obj).encode("utf-8"))
    return status, json.loads(body)


def test_health(api, op_model):
    status, body = _get(api + "/api/health")
    payload = json.loads(body)
    assert status == 200
    assert payload["status"] == "ok"
    assert payload["fingerprint"] == op_model.fingerprint


def test_classify_contract(api):
    status, payload = _post(
        api + "/api/classify", {"before": "x=1", "after": "x+1=1+1"}
    )
    assert status == 200
    ops = payload["operations"]
    assert [o["label"] for o in ops] != []
    assert {o["label"] for o in ops} == set(OPS)
    probs = [o["prob"] for o in ops]
    assert probs == sorted(probs, reverse=True)
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert abs(sum(probs) - 1.0) < 1e-9
    # x=1 -> x+1=1+1 is a Table-1 ADD_SIDE application: oracle-valid
    assert payload["valid"] is True


def test_classify_invalid_step(api):
    status, payload = _post(api + "/api/classify", {"before": "x=1", "after": "x=5"})
    assert status == 200
    assert payload["valid"] is False


def test_classify_parse_error_422(api):
    status, payload = _post(api + "/api/classify", {"before": "x=(", "after": "x=1"})
    assert status == 422
    assert payload["field"] == "before"
    assert "offset" in payload
    assert "parse" in payload["error"]


def test_classify_missing_field_422(api):
    status, payload = _post(api + "/api/classify", {"before": "x=1"})
    assert status == 422
    assert payload["field"] == "after"


def test_malformed_json_400(api):
    status, body = _post_raw(api + "/api/classify", b"{not json")
    assert status == 400
    assert "JSON" in json.loads(body)["error"]


def test_unknown_routes_404(api):
    status, _ = _get(api + "/api/nope")
    assert status == 404
    status, _ = _post_raw(api + "/api/nope", b"{}")
    assert status == 404


def test_feedback_contract(api):
    status, payload = _post(
        api + "/api/feedback", {"before": "x+1=2", "after": "x+1=2"}
    )
    assert status == 200
    labels = [f["label"] for f in payload["feedback"]]
    assert set(labels) == {k.name for k in BugKind}
    probs = [f["prob"] for f in payload["feedback"]]
    assert probs == sorted(probs, reverse=True)


def test_feedback_without_model_503(api_no_feedback):
    status, payload = _post(
        api_no_feedback + "/api/feedback", {"before": "x=1", "after": "x=2"}
    )
    assert status == 503
    assert "feedback" in payload["error"]


def test_identical_requests_identical_responses(api):
    body = {"before": "x+5=9", "after": "x+5-5=9-5"}
    r1 = _post_raw(api + "/api/classify", json.dumps(body).encode())
    r2 = _post_raw(api + "/api/classify", json.dumps(body).encode())
    assert r1 == r2


def test_health_after_posts_stateless(api):
    _post(api + "/api/classify", {"before": "x=1", "after": "x+1=1+1"})
    status, body = _get(api + "/api/health")
    assert status == 200
    assert json.loads(body)["status"] == "ok"
