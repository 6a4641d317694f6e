"""Threaded stub of a chat-completions endpoint for tests.

The reply function receives the request payload and returns either a
plain content string, or (status_code, body) for fault injection. A
model-keyed script map turns the stub into a recorded-replay server:
each request pops (or cycles) the next canned reply for its model.
"""

from __future__ import annotations

import itertools
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterable


def scripted_replies(scripts: dict[str, Iterable[str]], *, cycle: bool = True) -> Callable:
    iterators = {
        model: itertools.cycle(replies) if cycle else iter(replies)
        for model, replies in scripts.items()
    }
    lock = threading.Lock()

    def reply(payload: dict) -> str:
        model = payload.get("model", "")
        with lock:
            try:
                return next(iterators[model])
            except (KeyError, StopIteration):
                return "action_type: none"

    return reply


class StubLLMServer:
    def __init__(self, reply_fn: Callable | None = None):
        self.reply_fn = reply_fn or (lambda payload: "action_type: none")
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802 (http.server API)
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                with stub._lock:
                    stub.requests.append(payload)
                result = stub.reply_fn(payload)
                if isinstance(result, tuple):
                    status, body = result
                else:
                    status, body = 200, {
                        "choices": [{"message": {"role": "assistant", "content": result}}],
                        "usage": {"prompt_tokens": 7, "completion_tokens": 5, "total_tokens": 12},
                    }
                data = (body if isinstance(body, str) else json.dumps(body)).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args) -> None:
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_address[1]}"

    def start(self) -> "StubLLMServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "StubLLMServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
