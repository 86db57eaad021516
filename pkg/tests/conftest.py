import http.server
import json
import socket
import threading
from pathlib import Path

import pytest

from llmlogad import synthetic
from llmlogad.ingest import BGL, parse_line

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def bgl(content: str, anomalous: bool = False, i: int = 0, node: str = "R02-M1-N0") -> str:
    return synthetic.bgl_line(anomalous, i, node, content)


def records_from(lines, spec=BGL):
    return [parse_line(i, line, spec) for i, line in enumerate(lines)]


@pytest.fixture
def write_log(tmp_path):
    def write(lines, name="log.txt"):
        path = tmp_path / name
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path

    return write


@pytest.fixture
def no_network(monkeypatch):
    """Any attempt to open a socket fails the test."""

    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket, "socket", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(socket, "getaddrinfo", refuse)


class FakeChatServer:
    """Local OpenAI-style endpoint answering from ``respond(prompt_text)``."""

    def __init__(self, respond):
        self.requests = []
        outer = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                outer.requests.append((self.path, dict(self.headers), body))
                text = respond(body["messages"][0]["content"])
                payload = json.dumps(
                    {"choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


def keyword_reply(text: str) -> str:
    """Deterministic stand-in model: flags any sequence mentioning an error."""
    if text.startswith("Please format"):
        return '{"is_anomaly": false, "reports": "", "preventive_measures": ""}'
    seq = text.rsplit("Log sequence: ", 1)[-1]
    if "error" in seq:
        return '{"is_anomaly": true, "reports": "error events present", "preventive_measures": "inspect the node"}'
    return '{"is_anomaly": false, "reports": "", "preventive_measures": ""}'


@pytest.fixture
def chat_server():
    servers = []

    def start(respond=keyword_reply):
        server = FakeChatServer(respond)
        servers.append(server)
        return server

    yield start
    for s in servers:
        s.close()


CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Context manager recording a PASS/FAIL line for an acceptance criterion."""
    import contextlib
    import time

    @contextlib.contextmanager
    def check(number: int, title: str):
        start = time.perf_counter()
        notes: list[str] = []
        try:
            yield notes
        except BaseException as exc:
            CRITERIA[number] = f"criterion {number} FAIL  {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            raise
        elapsed = time.perf_counter() - start
        detail = "; ".join(notes + [f"{elapsed:.2f}s"])
        CRITERIA[number] = f"criterion {number} PASS  {title} ({detail})"

    return check


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
