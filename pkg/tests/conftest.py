from __future__ import annotations

import http.server
import sys
import threading
from pathlib import Path

import pytest

from indyforge import genesis, sample
from indyforge.roster import parse_steward_csv, parse_trustee_csv, validate_roster

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
GOLDEN = TESTS / "golden"

sys.path.insert(0, str(TESTS))


@pytest.fixture(scope="session")
def fixture_net() -> sample.SampleNetwork:
    return sample.sample_network(stewards=4, trustees=3)


@pytest.fixture(scope="session")
def fixture_roster():
    trustees = parse_trustee_csv((FIXTURES / "trustees.csv").read_bytes())
    stewards = parse_steward_csv((FIXTURES / "stewards.csv").read_bytes())
    return validate_roster(trustees, stewards, strict=True)


@pytest.fixture(scope="session")
def domain_doc(fixture_roster) -> genesis.GenesisDoc:
    return genesis.build_domain_genesis(fixture_roster)


@pytest.fixture(scope="session")
def pool_doc(fixture_roster) -> genesis.GenesisDoc:
    return genesis.build_pool_genesis(fixture_roster)


@pytest.fixture(scope="session")
def golden_domain() -> bytes:
    return (GOLDEN / genesis.DOMAIN_FILE).read_bytes()


@pytest.fixture(scope="session")
def golden_pool() -> bytes:
    return (GOLDEN / genesis.POOL_FILE).read_bytes()


class _Stub(http.server.BaseHTTPRequestHandler):
    routes: dict[str, bytes] = {}

    def do_GET(self):
        body = self.routes.get(self.path)
        if body is None:
            self.send_error(404)
            return
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server(golden_domain, golden_pool):
    mid = len(golden_pool) // 2 + 17
    _Stub.routes = {"/pool": golden_pool, "/domain": golden_domain, "/truncated": golden_pool[:mid]}
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Stub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


_acceptance: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")
