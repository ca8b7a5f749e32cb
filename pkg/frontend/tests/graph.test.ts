import { describe, expect, it } from "vitest";

import { layoutGraph, predecessorsOf } from "../src/layout.js";
import { graphSvg } from "../src/svg.js";
import type { GraphJson } from "../src/types.js";

// A resolved conflict: mov3 cancelled, add4 rebased under the merge mov8.
const resolved: GraphJson = {
  constructors: { "0": "@init:0" },
  nodes: [
    { id: "@init:0", actions: [{ op: "add", reg: 0, value: 0 }], premises: [] },
    { id: "r1:1", actions: [{ op: "add", reg: 0, value: 2 }], premises: ["@init:0"] },
    { id: "r1:2", actions: [{ op: "mov", reg: 0, value: 3 }], premises: ["@init:0", "r1:1"] },
    { id: "r2:1", actions: [{ op: "add", reg: 0, value: 4 }], premises: ["r1:1"] },
    { id: "r1:3", actions: [{ op: "mov", reg: 0, value: 8 }], premises: ["@init:0", "r1:1"] },
  ],
  rebases: { "r1:2": ["@void:0"], "r2:1": ["r1:3"] },
};

describe("layout", () => {
  it("collects premises plus non-tombstone rebase targets as predecessors", () => {
    expect(predecessorsOf(resolved, "r2:1").sort()).toEqual(["r1:1", "r1:3"]);
    expect(predecessorsOf(resolved, "r1:2").sort()).toEqual(["@init:0", "r1:1"]);
  });

  it("layers every node strictly below its predecessors", () => {
    const layout = layoutGraph(resolved);
    for (const edge of layout.edges) {
      const a = layout.positions.get(edge.from)!;
      const b = layout.positions.get(edge.to)!;
      expect(a.layer).toBeLessThan(b.layer);
    }
    // the merge sits above the operation rebased under it
    const merge = layout.positions.get("r1:3")!;
    const rebased = layout.positions.get("r2:1")!;
    expect(merge.layer).toBeLessThan(rebased.layer);
  });

  it("never draws an edge that the serialization does not carry", () => {
    const layout = layoutGraph(resolved);
    const premiseEdges = new Set(
      resolved.nodes.flatMap((n) => n.premises.map((p) => `${p}->${n.id}`)),
    );
    const rebaseEdges = new Set(
      Object.entries(resolved.rebases).flatMap(([id, ts]) =>
        ts.filter((t) => t !== "@void:0").map((t) => `${t}->${id}`),
      ),
    );
    for (const edge of layout.edges) {
      const key = `${edge.from}->${edge.to}`;
      expect(edge.rebase ? rebaseEdges.has(key) : premiseEdges.has(key)).toBe(true);
    }
    expect(layout.edges.filter((e) => e.rebase)).toHaveLength(1);
  });
});

describe("svg rendering", () => {
  it("renders solid entails edges, dashed rebases, struck cancelled nodes", () => {
    const svg = graphSvg(resolved);
    expect(svg).toContain("<svg");
    const dashedEdges = svg
      .split("\n")
      .filter((l) => l.includes('class="edge rebase"'));
    expect(dashedEdges).toHaveLength(1);
    expect(dashedEdges[0]).toContain("stroke-dasharray");
    // cancelled node struck and dashed-outlined, tombstone itself not drawn
    expect(svg).toContain('class="node cancelled"');
    expect(svg).toContain('class="strike"');
    expect(svg).not.toContain("@void:0");
  });

  it("highlights conflicting premises and scope on request", () => {
    const svg = graphSvg(resolved, {
      highlightPremises: new Set(["r1:1"]),
      scope: new Set(["r2:1"]),
      selected: "r2:1",
    });
    expect(svg).toContain("conflicting-premise");
    expect(svg).toContain("in-scope");
    expect(svg).toContain("selected");
  });

  it("escapes labels", () => {
    const tricky: GraphJson = {
      constructors: { "0": "@init:0" },
      nodes: [
        {
          id: "@init:0",
          actions: [{ op: "mov", reg: 0, value: "<b>&\"x\"</b>" }],
          premises: [],
        },
      ],
      rebases: {},
    };
    const svg = graphSvg(tricky);
    expect(svg).toContain("&lt;b&gt;&amp;&quot;x&quot;&lt;/b&gt;");
  });
});
