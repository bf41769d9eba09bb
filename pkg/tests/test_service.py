import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from sentaug.service import (
    HttpGenerationClient,
    MockGenerationClient,
    ServiceError,
    extract_query,
)


def test_extract_query_takes_last_example_block():
    prompt = (
        "Do the thing.\n\n"
        "Example: old source\n\nCounterfactual: old flip\n\n"
        "Example: the query text\n\nCounterfactual:"
    )
    assert extract_query(prompt) == "the query text"


def test_extract_query_without_marker_returns_stripped_prompt():
    assert extract_query("  just text  ") == "just text"


class TestMockClient:
    def message(self, query):
        return [{"role": "user", "content": f"Example: {query}\n\nCounterfactual:"}]

    def test_canned_response_wins(self):
        client = MockGenerationClient(responses={"hello": "goodbye"})
        assert client.complete(self.message("hello"), 0.2) == "goodbye"

    def test_responder_fallback(self):
        client = MockGenerationClient(responder=lambda q: q.upper())
        assert client.complete(self.message("abc"), 0.2) == "ABC"

    def test_lexicon_flip_default(self):
        client = MockGenerationClient()
        out = client.complete(self.message("the fabric is great"), 0.2)
        assert out == "the fabric is terrible"

    def test_call_count(self):
        client = MockGenerationClient()
        client.complete(self.message("a"), 0.2)
        client.complete(self.message("b"), 0.2)
        assert client.call_count == 2 and client.calls == ["a", "b"]


class _Handler(BaseHTTPRequestHandler):
    behavior = "chat"

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        query = body["messages"][-1]["content"]
        if self.behavior == "error":
            self.send_response(500)
            self.end_headers()
            return
        if self.behavior == "chat":
            payload = {"choices": [{"message": {"content": f"echo: {query}"}}]}
        elif self.behavior == "completion":
            payload = {"completion": f"echo: {query}"}
        else:
            payload = {"choices": [{"text": f"echo: {query}"}]}
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


@pytest.mark.parametrize("behavior", ["chat", "completion", "text"])
def test_http_client_response_shapes(http_server, behavior):
    _Handler.behavior = behavior
    client = HttpGenerationClient(http_server, max_retries=1)
    out = client.complete([{"role": "user", "content": "hi"}], temperature=0.2)
    assert out == "echo: hi"


def test_http_client_retries_then_raises(http_server):
    _Handler.behavior = "error"
    client = HttpGenerationClient(http_server, max_retries=2)
    with pytest.raises(ServiceError) as exc_info:
        client.complete([{"role": "user", "content": "hi"}], temperature=0.2)
    assert exc_info.value.attempts == 2
    _Handler.behavior = "chat"


def test_completion_text_rejects_unknown_shape():
    with pytest.raises(ServiceError):
        HttpGenerationClient._completion_text({"nope": 1})
