"""Shared fixtures: in-process stub definition and embedding services.

The stubs speak the same wire contracts as the real services (POST /define
with prompt/target/language/decoding, POST /embed with text) but respond
deterministically, so every network-facing test runs offline and
reproducibly. Behaviour is adjusted per test through the mutable StubState.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

import pytest


def default_define(payload: dict) -> str:
    digest = hashlib.md5(payload["prompt"].encode("utf-8")).hexdigest()
    return f"the meaning of {payload['target']} as used in context {digest[:6]}"


def default_embed(payload: dict) -> list[float]:
    # Deterministic pseudo-random unit vector derived from the text.
    digest = hashlib.md5(payload["text"].encode("utf-8")).digest()
    raw = [b - 127.5 for b in digest[:8]]
    norm = sum(x * x for x in raw) ** 0.5
    return [x / norm for x in raw]


@dataclass
class StubState:
    define_fn: Callable[[dict], str] = default_define
    embed_fn: Callable[[dict], list[float]] = default_embed
    required_token: str | None = None
    fail_next: int = 0  # each POST consumes one and returns a 500
    fail_targets: set = field(default_factory=set)  # targets that always 500
    requests: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def seen(self, path: str) -> list[dict]:
        with self.lock:
            return [r["payload"] for r in self.requests if r["path"] == path]


class _StubHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):  # keep test output clean
        pass

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        state: StubState = self.server.state
        length = int(self.headers.get("Content-Length", 0))
        try:
            payload = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._reply(400, {"error": "bad json"})
            return
        with state.lock:
            state.requests.append(
                {"path": self.path, "payload": payload, "auth": self.headers.get("Authorization")}
            )
            if state.fail_next > 0:
                state.fail_next -= 1
                self._reply(500, {"error": "injected failure"})
                return
        if state.required_token is not None:
            if self.headers.get("Authorization") != f"Bearer {state.required_token}":
                self._reply(401, {"error": "missing or bad token"})
                return
        if self.path == "/define":
            if payload.get("target") in state.fail_targets:
                self._reply(500, {"error": "target configured to fail"})
                return
            self._reply(200, {"definition": state.define_fn(payload)})
        elif self.path == "/embed":
            self._reply(200, {"vector": state.embed_fn(payload)})
        else:
            self._reply(404, {"error": f"unknown path {self.path}"})


@dataclass
class StubService:
    url: str
    state: StubState

    @property
    def define_url(self) -> str:
        return f"{self.url}/define"

    @property
    def embed_url(self) -> str:
        return f"{self.url}/embed"


@pytest.fixture
def stub_service():
    state = StubState()
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.state = state
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield StubService(url=f"http://127.0.0.1:{server.server_port}", state=state)
    finally:
        server.shutdown()
        thread.join()
