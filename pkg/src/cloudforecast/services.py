"""Long-running loopback-friendly HTTP services: the probe agent and the stub workflow node.

Wire protocols:
  agent: GET /v1/ping?host=<h>&samples=<n>&timeout_ms=<t> -> {"ok", "rtts_ms", "failures"}
         GET /v1/http?url=<u>&samples=<n>&timeout_ms=<t>  -> same shape
         GET /v1/health -> {"ok": true}
  node:  GET /work?delay_ms=<n>&bytes=<n> -> n pseudo-random bytes after the delay
         GET /v1/health -> {"ok": true}
"""

import json
import os
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import requests

from .measurement import EchoProber, as_url


class _JsonRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # quiet by default
        pass

    def send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def query(self) -> dict[str, str]:
        raw = parse_qs(urlparse(self.path).query)
        return {key: values[-1] for key, values in raw.items()}

    def int_param(self, params: dict, name: str, default: int, minimum: int = 0) -> int:
        value = int(params.get(name, default))
        if value < minimum:
            raise ValueError(f"{name} must be >= {minimum}")
        return value


class AgentHandler(_JsonRequestHandler):
    """Probes targets on behalf of a remote analyzer."""

    def do_GET(self):
        path = urlparse(self.path).path
        try:
            if path == "/v1/health":
                self.send_json(200, {"ok": True})
            elif path == "/v1/ping":
                self.send_json(200, self._ping())
            elif path == "/v1/http":
                self.send_json(200, self._http())
            else:
                self.send_json(404, {"ok": False, "error": f"unknown path {path}"})
        except (ValueError, KeyError) as exc:
            self.send_json(400, {"ok": False, "error": str(exc)})

    def _ping(self) -> dict:
        params = self.query()
        host = params["host"]
        samples = self.int_param(params, "samples", 5, minimum=1)
        timeout_s = self.int_param(params, "timeout_ms", 3000, minimum=1) / 1000.0
        prober: EchoProber = self.server.prober  # type: ignore[attr-defined]
        rtts = []
        for _ in range(samples):
            rtt = prober.probe(host, timeout_s)
            if rtt is not None:
                rtts.append(rtt)
        return {"ok": bool(rtts), "rtts_ms": rtts, "failures": samples - len(rtts)}

    def _http(self) -> dict:
        params = self.query()
        url = as_url(params["url"])
        samples = self.int_param(params, "samples", 5, minimum=1)
        timeout_s = self.int_param(params, "timeout_ms", 3000, minimum=1) / 1000.0
        rtts = []
        for _ in range(samples):
            start = time.perf_counter()
            try:
                requests.get(url, timeout=timeout_s)
            except requests.RequestException:
                continue
            rtts.append((time.perf_counter() - start) * 1000.0)
        return {"ok": bool(rtts), "rtts_ms": rtts, "failures": samples - len(rtts)}


class StubNodeHandler(_JsonRequestHandler):
    """Minimal workflow node: burns service time, then emits a payload."""

    def do_GET(self):
        path = urlparse(self.path).path
        try:
            if path == "/v1/health":
                self.send_json(200, {"ok": True})
            elif path == "/work":
                self._work()
            else:
                self.send_json(404, {"ok": False, "error": f"unknown path {path}"})
        except (ValueError, KeyError) as exc:
            self.send_json(400, {"ok": False, "error": str(exc)})

    def _work(self):
        params = self.query()
        delay_ms = self.int_param(params, "delay_ms", 0)
        size = self.int_param(params, "bytes", 0)
        if delay_ms:
            time.sleep(delay_ms / 1000.0)
        self.send_response(200)
        self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(size))
        self.end_headers()
        remaining = size
        while remaining > 0:
            chunk = os.urandom(min(remaining, 65536))
            self.wfile.write(chunk)
            remaining -= len(chunk)


def make_agent_server(host: str, port: int) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), AgentHandler)
    server.prober = EchoProber()  # type: ignore[attr-defined]
    return server


def make_node_server(host: str, port: int) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), StubNodeHandler)


def start_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    """Run a server on a daemon thread (used by tests and embedders)."""
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
