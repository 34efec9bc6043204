"""HTTP JSON inference service: health, classify, and feedback endpoints.

The service is stateless: handlers read two immutable model snapshots (the
operation classifier and, optionally, a feedback classifier), so identical
request bodies always produce identical responses.
"""

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .annotate import check_validity
from .expr import ExprError, parse


def _ranked_payload(probs, classes):
    order = sorted(range(len(classes)), key=lambda i: (-probs[i], i))
    return [{"label": classes[i], "prob": float(probs[i])} for i in order]


def build_handler(model, feedback_model=None, oracle_seed=0):
    """Request handler class bound to immutable model snapshots."""

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _send(self, status, payload):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            if self.path == "/api/health":
                self._send(200, {"status": "ok", "fingerprint": model.fingerprint})
            else:
                self._send(404, {"error": f"unknown route GET {self.path}"})

        def _read_pair(self):
            """Parsed (before, after) expressions, or None after an error reply."""
            try:
                length = int(self.headers.get("Content-Length", "0"))
            except ValueError:
                length = 0
            raw = self.rfile.read(length)
            try:
                payload = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, ValueError):
                self._send(400, {"error": "request body is not valid JSON"})
                return None
            if not isinstance(payload, dict):
                self._send(422, {"error": "request body must be a JSON object"})
                return None
            exprs = []
            for field in ("before", "after"):
                if field not in payload or not isinstance(payload[field], str):
                    self._send(
                        422, {"error": f"missing string field {field!r}",
                              "field": field},
                    )
                    return None
                try:
                    exprs.append(parse(payload[field]))
                except ExprError as exc:
                    self._send(
                        422,
                        {
                            "error": f"expression {field!r} does not parse: {exc}",
                            "field": field,
                            "offset": getattr(exc, "offset", 0),
                        },
                    )
                    return None
            return exprs[0], exprs[1]

        def do_POST(self):
            if self.path == "/api/classify":
                pair = self._read_pair()
                if pair is None:
                    return
                probs = model.predict_proba([pair])[0]
                operations = _ranked_payload(probs, model.classes)
                valid = check_validity(
                    pair[0], pair[1], [o["label"] for o in operations],
                    seed=oracle_seed,
                )
                self._send(200, {"operations": operations, "valid": valid})
            elif self.path == "/api/feedback":
                if feedback_model is None:
                    self._send(503, {"error": "no feedback model loaded"})
                    return
                pair = self._read_pair()
                if pair is None:
                    return
                probs = feedback_model.predict_proba([pair])[0]
                self._send(
                    200, {"feedback": _ranked_payload(probs, feedback_model.classes)}
                )
            else:
                self._send(404, {"error": f"unknown route POST {self.path}"})

    return Handler


def make_server(model, feedback_model=None, host="127.0.0.1", port=8080):
    """A ThreadingHTTPServer serving the inference API; caller runs it."""
    handler = build_handler(model, feedback_model)
    return ThreadingHTTPServer((host, port), handler)


def serve(model, feedback_model=None, host="127.0.0.1", port=8080):
    """Run the service until interrupted; prints the bound address."""
    httpd = make_server(model, feedback_model, host, port)
    bound_host, bound_port = httpd.server_address[:2]
    print(f"serving on http://{bound_host}:{bound_port} "
          f"(model fingerprint {model.fingerprint})")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
