"""HTTP inference service for the interactive triage loop.

Endpoints:
  GET  /health     -> {"status", "model_loaded"}
  GET  /v1/model   -> model metadata (version, seed, epsilon, threshold, ...)
  POST /v1/step1   -> early diagnosis for an 18-field feature document
  POST /v1/step2   -> final diagnosis from a session id (or inline
                      meta-features) plus the 10-field lab/CXR document

The service is stateless apart from an optional TTL-bounded session cache.
Session ids are content-derived (request digest plus model seed), so
identical requests against the same model return identical bodies.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

import numpy as np

from .domain import AGE_RANGE, BINARY_FIELDS, Label, STEP1_FIELDS, STEP2_FIELDS
from .errors import TpisError
from .pipeline import TpisModel, early_diagnose, final_diagnose
from .stacking import VotePanel

DEFAULT_SESSION_TTL_SECONDS = 3600.0


class SessionCache:
    """Thread-safe TTL cache for step-1 sessions."""

    def __init__(self, ttl_seconds: float = DEFAULT_SESSION_TTL_SECONDS, clock=time.monotonic):
        self.ttl = float(ttl_seconds)
        self._clock = clock
        self._lock = threading.Lock()
        self._items: dict[str, tuple[float, dict[str, Any]]] = {}

    def put(self, session_id: str, data: dict[str, Any]) -> None:
        now = self._clock()
        with self._lock:
            self._prune(now)
            self._items[session_id] = (now, data)

    def get(self, session_id: str) -> dict[str, Any] | None:
        now = self._clock()
        with self._lock:
            self._prune(now)
            entry = self._items.get(session_id)
            return entry[1] if entry else None

    def _prune(self, now: float) -> None:
        dead = [key for key, (ts, _) in self._items.items() if now - ts > self.ttl]
        for key in dead:
            del self._items[key]


class _BadRequest(Exception):
    def __init__(self, payload: dict[str, Any]):
        super().__init__(payload.get("error", "bad request"))
        self.payload = payload


def _validate_fields(doc: Any, expected: tuple[str, ...], what: str) -> dict[str, float]:
    if not isinstance(doc, dict):
        raise _BadRequest({"error": f"{what} must be an object"})
    missing = [f for f in expected if f not in doc]
    extra = [f for f in doc if f not in expected]
    if missing or extra:
        raise _BadRequest(
            {"error": f"{what} fields do not match", "missing": missing, "extra": extra}
        )
    values: dict[str, float] = {}
    bad: list[str] = []
    for name in expected:
        raw = doc[name]
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or math.isnan(float(raw)):
            bad.append(name)
            continue
        value = float(raw)
        if name in BINARY_FIELDS and value not in (0.0, 1.0):
            bad.append(name)
        elif name == "age" and not (AGE_RANGE[0] <= value <= AGE_RANGE[1]):
            bad.append(name)
        else:
            values[name] = value
    if bad:
        raise _BadRequest({"error": "invalid field values", "fields": bad})
    return values


class TriageService:
    """Holds the immutable model snapshot and implements the endpoints."""

    def __init__(self, model: TpisModel | None, session_ttl: float = DEFAULT_SESSION_TTL_SECONDS):
        self._model = model
        self.sessions = SessionCache(session_ttl)

    @property
    def model(self) -> TpisModel | None:
        return self._model

    def set_model(self, model: TpisModel) -> None:
        # attribute assignment is atomic; in-flight requests keep their snapshot
        self._model = model

    def handle(self, method: str, path: str, body: bytes) -> tuple[int, dict[str, Any]]:
        try:
            if method == "GET" and path == "/health":
                return 200, {"status": "ok", "model_loaded": self._model is not None}
            if method == "GET" and path == "/v1/model":
                return self._model_info()
            if method == "POST" and path == "/v1/step1":
                return self._step1(self._parse_json(body))
            if method == "POST" and path == "/v1/step2":
                return self._step2(self._parse_json(body))
            return 404, {"error": f"no such endpoint: {method} {path}"}
        except _ServiceUnavailable:
            return 503, {"error": "no model loaded"}
        except _BadRequest as exc:
            return 400, exc.payload
        except TpisError as exc:
            return 400, {"error": str(exc)}

    @staticmethod
    def _parse_json(body: bytes) -> Any:
        try:
            return json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise _BadRequest({"error": f"request body is not valid JSON: {exc}"}) from exc

    def _require_model(self) -> TpisModel:
        if self._model is None:
            raise _ServiceUnavailable()
        return self._model

    def _model_info(self) -> tuple[int, dict[str, Any]]:
        from .storage import ARCHIVE_FORMAT_VERSION

        model = self._require_model()
        return 200, {
            "kind": "tpis_model",
            "format_version": ARCHIVE_FORMAT_VERSION,
            "seed": model.seed,
            "folds": model.folds,
            "epsilon": model.policy.epsilon,
            "route_threshold": model.policy.route_threshold,
            "step1_fields": list(STEP1_FIELDS),
            "step2_fields": list(STEP2_FIELDS),
            "layer_sizes": [len(model.layer1), len(model.layer2), len(model.step2_layer)],
        }

    def _step1(self, doc: Any) -> tuple[int, dict[str, Any]]:
        model = self._require_model()
        values = _validate_fields(doc, STEP1_FIELDS, "step-1 document")
        vector = [values[f] for f in STEP1_FIELDS]
        label, cs, meta2 = early_diagnose(model, np.asarray(vector))
        routed = label is None or cs < model.policy.route_threshold
        digest = hashlib.sha256(
            json.dumps({"v": vector, "seed": model.seed}, sort_keys=True).encode()
        ).hexdigest()[:16]
        self.sessions.put(
            digest,
            {"meta2": list(meta2.probs), "cs": cs, "routed": routed, "undetermined": label is None},
        )
        return 200, {
            "label": label.value if label is not None else "undetermined",
            "cs": cs,
            "routed": routed,
            "meta2": list(meta2.probs),
            "session_id": digest,
        }

    def _step2(self, doc: Any) -> tuple[int, dict[str, Any]]:
        model = self._require_model()
        if not isinstance(doc, dict):
            raise _BadRequest({"error": "step-2 request must be an object"})
        allowed = {"session_id", "meta2", "features"}
        extra = [k for k in doc if k not in allowed]
        if extra:
            raise _BadRequest({"error": "unknown request keys", "extra": extra})
        if "features" not in doc:
            raise _BadRequest({"error": "step-2 request needs a 'features' object", "missing": ["features"]})
        values = _validate_fields(doc["features"], STEP2_FIELDS, "step-2 document")

        warning = None
        if "session_id" in doc:
            session = self.sessions.get(str(doc["session_id"]))
            if session is None:
                return 404, {"error": f"unknown or expired session {doc['session_id']!r}"}
            meta2 = session["meta2"]
            if not session["routed"]:
                warning = "step 1 was already confident; step-2 testing was not requested"
        elif "meta2" in doc:
            meta2 = doc["meta2"]
            if not isinstance(meta2, list) or len(meta2) != len(model.layer2):
                raise _BadRequest(
                    {"error": f"meta2 must be a list of {len(model.layer2)} probabilities"}
                )
            if not all(isinstance(v, (int, float)) and 0.0 <= float(v) <= 1.0 for v in meta2):
                raise _BadRequest({"error": "meta2 entries must be probabilities in [0, 1]"})
        else:
            raise _BadRequest({"error": "provide 'session_id' or 'meta2'"})

        panel = VotePanel(tuple(float(v) for v in meta2))
        x2 = np.asarray([values[f] for f in STEP2_FIELDS])
        final = final_diagnose(model, panel, x2)
        fs4 = np.concatenate([model.scale_step2(x2), np.asarray(panel.probs)])
        probs = [float(m.predict_proba(fs4)) for m in model.step2_layer.learners]
        body: dict[str, Any] = {
            "final_label": final.value,
            "votes": [Label.TB.value if p >= 0.5 else Label.PNEUMONIA.value for p in probs],
            "probs": probs,
        }
        if warning:
            body["warning"] = warning
        return 200, body


class _ServiceUnavailable(Exception):
    pass


def make_server(
    service: TriageService, host: str = "127.0.0.1", port: int = 8430
) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _respond(self, status: int, payload: dict[str, Any]) -> None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _dispatch(self, method: str) -> None:
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            status, payload = service.handle(method, self.path, body)
            self._respond(status, payload)

        def do_GET(self) -> None:  # noqa: N802 (http.server naming)
            self._dispatch("GET")

        def do_POST(self) -> None:  # noqa: N802
            self._dispatch("POST")

        def do_OPTIONS(self) -> None:  # noqa: N802
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def log_message(self, fmt: str, *args: Any) -> None:
            pass  # request logging stays out of stdout; the CLI prints the bind line

    return ThreadingHTTPServer((host, port), Handler)
