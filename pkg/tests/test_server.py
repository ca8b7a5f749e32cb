"""HTTP service: the interactive reconcile API end-to-end over real sockets."""

import json
import socket
import threading
import urllib.request
from http.server import HTTPServer

import pytest

from conftest import SCENARIOS
from entailsync import Scenario, ScenarioRunner
from entailsync.server import ReconcileHandler


@pytest.fixture
def fig6_server():
    scenario = Scenario.load(str(SCENARIOS / "fig6.json"))
    runner = ScenarioRunner(scenario)
    handler = type("TestHandler", (ReconcileHandler,), {"runner": runner})
    server = HTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, runner
    server.shutdown()
    server.server_close()


def call(base, path, payload=None, method=None):
    req = urllib.request.Request(
        base + path,
        data=json.dumps(payload).encode() if payload is not None else None,
        method=method or ("POST" if payload is not None else "GET"),
        headers={"Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def drain_script(base):
    while True:
        status, body = call(base, "/step", payload={})
        assert status == 200
        if body.get("done") or body["remaining"] == 0:
            return


def test_state_before_any_step_shows_constructors(fig6_server):
    base, _ = fig6_server
    status, body = call(base, "/state")
    assert status == 200
    assert body["replicas"]["alice"]["1"] == "1pm-1.30pm"
    assert body["replicas"]["alice"]["2"] == "Bambi's"
    assert body["remaining_events"] > 0


def test_graph_route_serves_canonical_serialization(fig6_server):
    base, runner = fig6_server
    status, body = call(base, "/graph/alice")
    assert status == 200
    assert set(body) == {"constructors", "nodes", "rebases"}
    status, _ = call(base, "/graph/nobody")
    assert status == 404


def test_full_interactive_reconcile_flow(fig6_server):
    base, runner = fig6_server
    drain_script(base)
    status, body = call(base, "/conflicts")
    assert status == 200
    assert len(body["conflicts"]) == 1
    conflict = body["conflicts"][0]
    assert conflict["conflicting_premises"] == ["@init:2"]
    assert set(conflict["scope"]) == {"alice:1", "bob:1"}

    # keep both operations, replaying both effects
    plan = {
        "trigger": conflict["trigger"],
        "keep": conflict["scope"],
        "cancel": [],
        "merged": [
            {"op": "mov", "reg": 1, "value": "1pm-2pm"},
            {"op": "mov", "reg": 2, "value": "Meadow's"},
        ],
    }
    status, body = call(base, "/plan", payload=plan)
    assert status == 200, body
    assert body["report"]["resolved"]

    status, state = call(base, "/state")
    alice = state["replicas"]["alice"]
    assert alice["1"] == "1pm-2pm" and alice["2"] == "Meadow's"

    # push the resolution to bob and confirm convergence
    status, body = call(base, "/sync?from=alice&to=bob", payload={})
    assert status == 200
    status, state = call(base, "/state")
    assert state["replicas"]["bob"] == state["replicas"]["alice"]
    status, body = call(base, "/conflicts")
    assert body["conflicts"] == []


def test_overlapping_plan_rejected_422(fig6_server):
    base, runner = fig6_server
    drain_script(base)
    _, body = call(base, "/conflicts")
    conflict = body["conflicts"][0]
    bad = {
        "trigger": conflict["trigger"],
        "keep": conflict["scope"],
        "cancel": [conflict["scope"][0]],
        "merged": [],
    }
    status, body = call(base, "/plan", payload=bad)
    assert status == 422
    assert "overlap" in body["error"]


def test_plan_for_unknown_trigger_400(fig6_server):
    base, _ = fig6_server
    status, body = call(
        base, "/plan", payload={"trigger": "zz:9", "keep": [], "cancel": [], "merged": []}
    )
    assert status == 400


def test_cancelling_alice_keeps_original_time(fig6_server):
    base, runner = fig6_server
    drain_script(base)
    _, body = call(base, "/conflicts")
    conflict = body["conflicts"][0]
    plan = {
        "trigger": conflict["trigger"],
        "keep": ["bob:1"],
        "cancel": ["alice:1"],
        "merged": [{"op": "mov", "reg": 2, "value": "Meadow's"}],
    }
    status, body = call(base, "/plan", payload=plan)
    assert status == 200, body
    _, state = call(base, "/state")
    alice = state["replicas"]["alice"]
    assert alice["1"] == "1pm-1.30pm"  # cancelled op contributes nothing
    assert alice["2"] == "Meadow's"
