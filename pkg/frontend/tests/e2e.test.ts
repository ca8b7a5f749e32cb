/**
 * Scripted session against the real Python service: serve fig6, advance the
 * script to the conflict, draft and submit the keep-both plan, verify the
 * post-state, and confirm that an overlapping plan is blocked client-side
 * and rejected with 422 when forced.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, type ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import * as path from "node:path";

import { ReconcileApi } from "../src/api.js";
import { PlanDraft } from "../src/plan.js";
import { ghostFromConflict, graphSvg } from "../src/svg.js";

const REPO = path.resolve(__dirname, "../..");

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (typeof address === "object" && address) {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

let server: ChildProcess;
let api: ReconcileApi;

beforeAll(async () => {
  const port = await freePort();
  server = spawn(
    "python3",
    ["-m", "entailsync.cli", "serve", "scenarios/fig6.json", "--port", String(port)],
    { cwd: REPO, stdio: ["ignore", "pipe", "pipe"] },
  );
  api = new ReconcileApi(`http://127.0.0.1:${port}`);
  const deadline = Date.now() + 15000;
  for (;;) {
    try {
      await api.state();
      break;
    } catch {
      if (Date.now() > deadline) throw new Error("server did not come up");
      await new Promise((r) => setTimeout(r, 150));
    }
  }
}, 20000);

afterAll(() => {
  server?.kill();
});

describe("fig6 end-to-end reconcile", () => {
  it("walks the script into the calendar conflict and resolves it", async () => {
    const before = await api.state();
    expect(before.replicas["alice"]!["1"]).toBe("1pm-1.30pm");
    expect(before.replicas["alice"]!["2"]).toBe("Bambi's");

    while (await api.step()) {
      /* advance the scripted events */
    }

    const conflicts = await api.conflicts();
    expect(conflicts).toHaveLength(1);
    const conflict = conflicts[0]!;
    expect(conflict.conflicting_premises).toEqual(["@init:2"]);
    expect([...conflict.scope].sort()).toEqual(["alice:1", "bob:1"]);

    const graph = await api.graph(conflict.replica);
    // the view renders the fetched structure plus the suspended trigger
    const ghost = ghostFromConflict(conflict, graph);
    expect(ghost).not.toBeNull();
    const svg = graphSvg(graph, {
      highlightPremises: new Set(conflict.conflicting_premises),
      scope: new Set(conflict.scope),
      ghosts: ghost ? [ghost] : [],
    });
    expect(svg).toContain("alice:1");
    expect(svg).toContain("bob:1");
    expect(svg).toContain("incoming");
    expect(svg).toContain("conflicting-premise");

    // an overlapping draft never enables submit client-side
    const bad = new PlanDraft(conflict, graph);
    bad.cancel.add("alice:1"); // still kept: overlap
    expect(bad.valid()).toBe(false);
    expect(bad.problems().map((p) => p.code)).toContain("overlap");

    // ...and the server rejects it with 422 when forced past the client check
    const forced = await api.submitPlan({
      trigger: conflict.trigger,
      keep: [...conflict.scope].sort(),
      cancel: ["alice:1"],
      merged: [],
    });
    expect(forced.kind).toBe("rejected");
    if (forced.kind === "rejected") {
      expect(forced.status).toBe(422);
      expect(forced.reason).toContain("overlap");
    }

    // keep both operations: extend the time AND move the location
    const draft = new PlanDraft(conflict, graph);
    expect(draft.valid()).toBe(true);
    const outcome = await api.submitPlan(draft.toPlan());
    expect(outcome.kind).toBe("applied");

    const after = await api.state();
    expect(after.replicas["alice"]!["1"]).toBe("1pm-2pm");
    expect(after.replicas["alice"]!["2"]).toBe("Meadow's");

    // propagate to bob and confirm convergence
    await api.sync("alice", "bob");
    const final = await api.state();
    expect(final.replicas["bob"]).toEqual(final.replicas["alice"]);
    expect(await api.conflicts()).toHaveLength(0);
  }, 30000);
});
