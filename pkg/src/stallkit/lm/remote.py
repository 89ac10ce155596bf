"""HTTP backend client and a small reference server.

Wire protocol (JSON bodies)::

    POST /v1/encode  {"text": str}  -> {"ids": [int]}
    POST /v1/decode  {"ids": [int]} -> {"text": str}
    POST /v1/logits  {"ids": [int]} -> {"logits": [float; K]}
    GET  /v1/vocab                  -> {"size": K, "newline_id": int, "unk_id": int or null}
"""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Sequence

import numpy as np

from ..errors import BackendUnavailable, UnknownCharacter


class RemoteBackend:
    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.timeout = timeout
        info = self._call("GET", "/v1/vocab")
        self.vocab_size = int(info["size"])
        self.newline_id = int(info["newline_id"])
        self.unk_id = int(info["unk_id"]) if info.get("unk_id") is not None else None
        self._texts: dict[int, str] = {}
        self._lock = threading.Lock()

    def _call(self, method: str, path: str, body: dict | None = None) -> dict:
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(
            self.url + path, data=data, method=method, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode())
        except urllib.error.HTTPError as err:
            detail = err.read().decode(errors="replace")
            if err.code == 400 and "UnknownCharacter" in detail:
                raise UnknownCharacter("?", -1) from err
            raise BackendUnavailable(f"{path}: HTTP {err.code} {detail}") from err
        except (urllib.error.URLError, OSError, ValueError) as err:
            raise BackendUnavailable(f"{self.url}{path}: {err}") from err

    def encode(self, text: str) -> list[int]:
        return [int(i) for i in self._call("POST", "/v1/encode", {"text": text})["ids"]]

    def decode(self, ids: Sequence[int]) -> str:
        return self._call("POST", "/v1/decode", {"ids": [int(i) for i in ids]})["text"]

    def token_text(self, tid: int) -> str:
        with self._lock:
            if tid in self._texts:
                return self._texts[tid]
        text = self.decode([tid])
        with self._lock:
            self._texts[tid] = text
        return text

    def next_logits(self, ids: Sequence[int]) -> np.ndarray:
        values = np.asarray(self._call("POST", "/v1/logits", {"ids": [int(i) for i in ids]})["logits"], dtype=float)
        if values.shape != (self.vocab_size,):
            raise BackendUnavailable(f"server returned {values.shape[0]} logits, expected {self.vocab_size}")
        return values


def make_server(backend, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Serve ``backend`` over the wire protocol (port 0 picks a free port)."""

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _reply(self, code: int, payload: dict):
            body = json.dumps(payload).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/v1/vocab":
                info = {"size": backend.vocab_size, "newline_id": backend.newline_id}
                info["unk_id"] = getattr(backend, "unk_id", None)
                self._reply(200, info)
            else:
                self._reply(404, {"error": "not found"})

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
                if self.path == "/v1/encode":
                    self._reply(200, {"ids": backend.encode(body["text"])})
                elif self.path == "/v1/decode":
                    self._reply(200, {"text": backend.decode(body["ids"])})
                elif self.path == "/v1/logits":
                    self._reply(200, {"logits": [float(x) for x in backend.next_logits(body["ids"])]})
                else:
                    self._reply(404, {"error": "not found"})
            except UnknownCharacter as err:
                self._reply(400, {"error": f"UnknownCharacter: {err}"})
            except (KeyError, ValueError, TypeError) as err:
                self._reply(400, {"error": str(err)})

    return ThreadingHTTPServer((host, port), Handler)


def serve_in_thread(backend, host: str = "127.0.0.1", port: int = 0):
    """Start a server on a daemon thread; returns ``(server, url)``."""
    server = make_server(backend, host, port)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server, f"http://{server.server_address[0]}:{server.server_address[1]}"
