"""In-memory stub of the object-store HTTP subset, for tests and local runs."""

from __future__ import annotations

import argparse
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .store import _BUCKET_RE, sha256_hex, validate_key


class StubState:
    def __init__(self, token: str | None = None):
        self.objects: dict[tuple[str, str], bytes] = {}
        self.token = token
        self.fail_next: list[int] = []   # status codes to answer before serving normally
        self.requests: list[tuple[str, str]] = []
        self.lock = threading.Lock()


def _handler(state: StubState):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # keep test output quiet
            pass

        def _reply(self, code: int, body: bytes = b"", headers: dict | None = None) -> None:
            self.send_response(code)
            for k, v in (headers or {}).items():
                self.send_header(k, v)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _gate(self) -> tuple[str, str | None] | None:
            """Common checks; returns (bucket, key or None) or None after replying."""
            with state.lock:
                state.requests.append((self.command, self.path))
                forced = state.fail_next.pop(0) if state.fail_next else None
            if forced is not None:
                self._reply(forced)
                return None
            if state.token and self.headers.get("Authorization") != f"Bearer {state.token}":
                self._reply(401)
                return None
            parts = urlsplit(self.path).path.split("/", 3)
            if len(parts) < 3 or parts[1] != "v1" or not _BUCKET_RE.fullmatch(parts[2]):
                self._reply(400)
                return None
            key = parts[3] if len(parts) == 4 else None
            if key is not None:
                try:
                    validate_key(key)
                except ValueError:
                    self._reply(400)
                    return None
            return parts[2], key

        def do_PUT(self):
            n = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(n)
            target = self._gate()
            if target is None:
                return
            bucket, key = target
            if key is None:
                self._reply(400)
                return
            with state.lock:
                created = (bucket, key) not in state.objects
                state.objects[(bucket, key)] = body
            self._reply(201 if created else 200, headers={"x-content-sha256": sha256_hex(body)})

        def do_GET(self):
            target = self._gate()
            if target is None:
                return
            bucket, key = target
            if key is None:
                prefix = parse_qs(urlsplit(self.path).query).get("prefix", [""])[0]
                with state.lock:
                    keys = sorted(k for b, k in state.objects if b == bucket and k.startswith(prefix))
                self._reply(200, json.dumps(keys).encode(), {"Content-Type": "application/json"})
                return
            with state.lock:
                body = state.objects.get((bucket, key))
            if body is None:
                self._reply(404)
            else:
                self._reply(200, body, {"Content-Type": "application/octet-stream"})

    return Handler


class StubServer:
    """Threaded stub server; use as a context manager to get a base URL."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, token: str | None = None):
        self.state = StubState(token)
        self.httpd = ThreadingHTTPServer((host, port), _handler(self.state))
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join()

    def __enter__(self) -> "StubServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="Serve an in-memory skill store over HTTP.")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--token", default=None)
    args = ap.parse_args(argv)
    srv = StubServer(args.host, args.port, args.token)
    print(f"serving on {srv.url}", flush=True)
    try:
        srv.httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.httpd.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
