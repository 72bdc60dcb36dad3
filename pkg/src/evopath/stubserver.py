"""Local chat-completions stub answering from a request-hash -> canned-response file.

The mapping file is JSON: ``{"<sha256 of canonical request>": "<completion text>"}``.
A value may instead be ``{"status": 503}`` to simulate a failing backend, and a
``"*"`` key, if present, answers every request not otherwise listed.
"""
from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path


def request_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_mapping(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _completion(text: str) -> dict:
    return {
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text},
                     "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 0, "completion_tokens": len(text.split())},
    }


class StubChatServer:
    """Context manager running the stub on an ephemeral localhost port."""

    def __init__(self, mapping: dict | str | Path, host: str = "127.0.0.1", port: int = 0):
        self.mapping = mapping if isinstance(mapping, dict) else load_mapping(mapping)
        self.requests: list[dict] = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status: int, body: dict):
                data = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                if not self.path.rstrip("/").endswith("/chat/completions"):
                    self._send(404, {"error": f"no route {self.path}"})
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    payload = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._send(400, {"error": "body is not JSON"})
                    return
                stub.requests.append(payload)
                key = request_hash(payload)
                answer = stub.mapping.get(key, stub.mapping.get("*"))
                if answer is None:
                    self._send(404, {"error": f"no canned response for {key}"})
                elif isinstance(answer, dict):
                    self._send(int(answer.get("status", 500)), {"error": "stubbed failure"})
                else:
                    self._send(200, _completion(answer))

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread = None

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1"

    def start(self):
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def main(argv=None):
    import argparse

    ap = argparse.ArgumentParser(description="Serve canned chat completions for offline runs.")
    ap.add_argument("mapping", help="JSON file mapping request hash to completion text")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8099)
    args = ap.parse_args(argv)
    srv = StubChatServer(args.mapping, args.host, args.port)
    print(f"serving on {srv.endpoint}", flush=True)
    try:
        srv._server.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
