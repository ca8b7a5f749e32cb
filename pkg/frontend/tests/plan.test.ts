import { describe, expect, it } from "vitest";

import { PlanDraft, compareOpIds, replayedActions } from "../src/plan.js";
import type { ConflictJson, GraphJson } from "../src/types.js";

const graph: GraphJson = {
  constructors: { "0": "@init:0", "1": "@init:1", "2": "@init:2" },
  nodes: [
    { id: "@init:0", actions: [{ op: "mov", reg: 0, value: "Lunch" }], premises: [] },
    { id: "@init:1", actions: [{ op: "mov", reg: 1, value: "1pm-1.30pm" }], premises: [] },
    { id: "@init:2", actions: [{ op: "mov", reg: 2, value: "Bambi's" }], premises: [] },
    {
      id: "alice:1",
      actions: [{ op: "touch", reg: 2 }, { op: "mov", reg: 1, value: "1pm-2pm" }],
      premises: ["@init:1", "@init:2"],
    },
    {
      id: "bob:1",
      actions: [{ op: "mov", reg: 2, value: "Meadow's" }],
      premises: ["@init:2"],
    },
  ],
  rebases: {},
};

const conflict: ConflictJson = {
  replica: "alice",
  kind: "remote-trigger",
  trigger: "bob:1",
  conflicting_premises: ["@init:2"],
  scope: ["alice:1", "bob:1"],
  participants: ["alice:1", "bob:1"],
};

describe("operation id ordering", () => {
  it("orders by counter then replica", () => {
    const ids = ["b:2", "a:1", "b:1", "a:2"];
    expect([...ids].sort(compareOpIds)).toEqual(["a:1", "b:1", "a:2", "b:2"]);
  });
});

describe("PlanDraft", () => {
  it("defaults to keep-everything with a replay of kept actions", () => {
    const draft = new PlanDraft(conflict, graph);
    expect([...draft.keep].sort()).toEqual(["alice:1", "bob:1"]);
    expect(draft.cancel.size).toBe(0);
    expect(draft.merged.map((a) => a.op)).toEqual(["touch", "mov", "mov"]);
    expect(draft.valid()).toBe(true);
  });

  it("blocks overlapping keep/cancel before submit", () => {
    const draft = new PlanDraft(conflict, graph);
    draft.cancel.add("alice:1"); // force the overlap without setDisposition
    const problems = draft.problems();
    expect(problems.some((p) => p.code === "overlap")).toBe(true);
    expect(draft.valid()).toBe(false);
  });

  it("requires the partition to cover the whole scope", () => {
    const draft = new PlanDraft(conflict, graph);
    draft.keep.delete("alice:1");
    expect(draft.problems().some((p) => p.code === "incomplete-partition")).toBe(true);
  });

  it("cancelling drops the operation's actions from the default replay", () => {
    const draft = new PlanDraft(conflict, graph);
    draft.setDisposition("alice:1", "cancel");
    expect(draft.valid()).toBe(true);
    expect(draft.merged.map((a) => a.op)).toEqual(["mov"]);
    expect(draft.merged[0]!.value).toBe("Meadow's");
  });

  it("rejects merged actions on registers outside the participants", () => {
    const draft = new PlanDraft(conflict, graph);
    draft.addAction({ op: "mov", reg: 0, value: "smuggled" });
    expect(draft.problems().some((p) => p.code === "foreign-register")).toBe(true);
    draft.removeAction(draft.merged.length - 1);
    expect(draft.valid()).toBe(true);
  });

  it("reorders merged actions within bounds", () => {
    const draft = new PlanDraft(conflict, graph);
    const before = draft.merged.map((a) => `${a.op}:${a.reg}`);
    draft.moveAction(0, 1);
    const after = draft.merged.map((a) => `${a.op}:${a.reg}`);
    expect(after[0]).toBe(before[1]);
    expect(after[1]).toBe(before[0]);
    draft.moveAction(0, -1); // no-op at the boundary
    expect(draft.merged.map((a) => `${a.op}:${a.reg}`)).toEqual(after);
  });

  it("serializes to the wire plan shape", () => {
    const draft = new PlanDraft(conflict, graph);
    draft.setDisposition("alice:1", "cancel");
    const plan = draft.toPlan();
    expect(plan.trigger).toBe("bob:1");
    expect(plan.keep).toEqual(["bob:1"]);
    expect(plan.cancel).toEqual(["alice:1"]);
  });
});

describe("replayedActions", () => {
  it("concatenates kept actions in operation-id order", () => {
    const actions = replayedActions(
      ["bob:1", "alice:1"],
      new Set(["bob:1", "alice:1"]),
      graph,
    );
    // alice:1 sorts before bob:1 at equal counters
    expect(actions.map((a) => a.reg)).toEqual([2, 1, 2]);
  });
});
