import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


@pytest.fixture
def rpc_server():
    """Serve a ``helpers.FakeNode`` over HTTP JSON-RPC; yields a function that installs the node."""
    state = {"node": None, "auth": []}

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            state["auth"].append(self.headers.get("Authorization"))
            req = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            result, error = state["node"].handle(req["method"], req["params"])
            body = json.dumps({"result": result, "error": error, "id": req["id"]}).encode()
            # bitcoind signals RPC errors with a non-200 status
            self.send_response(500 if error else 200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()

    def install(node):
        state["node"] = node
        return f"http://127.0.0.1:{server.server_address[1]}"

    install.auth = state["auth"]
    yield install
    server.shutdown()
    server.server_close()


_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
