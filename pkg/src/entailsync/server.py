"""HTTP service for interactive reconciliation.

Single scenario, single writer: requests execute sequentially against one
ScenarioRunner.  The browser UI consumes exactly this API:

  GET  /state                per-replica register values
  GET  /graph/{replica}      canonical graph serialization
  GET  /conflicts            pending conflicts with premises and scope
  POST /plan                 submit a merge plan; 422 on an illegal plan
  POST /step                 advance one scripted event
  POST /sync?from=&to=       force a pairwise sync
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, HTTPServer
from urllib.parse import parse_qs, urlparse

from .errors import EntailSyncError, ForeignPremise, IllegalPlan, ScriptError
from .sim import Scenario, ScenarioRunner
from .sync import MergePlan
from .wire import graph_to_json


class ReconcileHandler(BaseHTTPRequestHandler):
    runner: ScenarioRunner = None  # set by serve()

    # -- plumbing ------------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, payload) -> None:
        body = json.dumps(payload, sort_keys=True).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        self.wfile.write(body)

    def _body(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        return json.loads(raw)

    def do_OPTIONS(self):
        self._send(200, {})

    # -- routes ---------------------------------------------------------------

    def do_GET(self):
        runner = self.runner
        url = urlparse(self.path)
        if url.path == "/state":
            self._send(
                200,
                {
                    "scenario": runner.scenario.name,
                    "registers": [
                        {"index": e.index, "kind": e.spec.kind}
                        for e in runner.registry.entries
                    ],
                    "replicas": runner.states(),
                    "remaining_events": runner.remaining(),
                },
            )
            return
        if url.path.startswith("/graph/"):
            name = url.path[len("/graph/") :]
            if name not in runner.replicas:
                self._send(404, {"error": f"unknown replica {name!r}"})
                return
            self._send(200, graph_to_json(runner.replicas[name].graph))
            return
        if url.path == "/conflicts":
            self._send(200, {"conflicts": runner.residual_conflicts()})
            return
        self._send(404, {"error": f"no route {url.path}"})

    def do_POST(self):
        runner = self.runner
        url = urlparse(self.path)
        try:
            if url.path == "/plan":
                body = self._body()
                plan = MergePlan.from_json(body)
                report = runner.submit_plan(body["trigger"], plan)
                self._send(200, {"report": report.to_json()})
                return
            if url.path == "/step":
                if not runner.remaining():
                    self._send(200, {"done": True, "remaining": 0})
                    return
                result = runner.step()
                self._send(
                    200, {"done": False, "result": result, "remaining": runner.remaining()}
                )
                return
            if url.path == "/sync":
                params = parse_qs(url.query)
                src = params.get("from", [""])[0]
                dst = params.get("to", [""])[0]
                report = runner.manual_sync(src, dst)
                self._send(200, {"report": report.to_json()})
                return
        except (IllegalPlan, ForeignPremise) as exc:
            self._send(422, {"error": str(exc)})
            return
        except (ScriptError, KeyError, ValueError) as exc:
            self._send(400, {"error": str(exc)})
            return
        except EntailSyncError as exc:
            self._send(422, {"error": str(exc)})
            return
        self._send(404, {"error": f"no route {url.path}"})


def serve(scenario: Scenario, host: str = "127.0.0.1", port: int = 8642, seed=None) -> None:
    runner = ScenarioRunner(scenario, seed=seed)
    handler = type("BoundHandler", (ReconcileHandler,), {"runner": runner})
    server = HTTPServer((host, port), handler)
    print(f"entailsync serving {scenario.name!r} on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
