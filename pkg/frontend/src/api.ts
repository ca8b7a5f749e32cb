/**
 * Typed client for the reconcile service.
 *
 * Reads never mutate; the only mutations are POST /plan, /step and /sync.
 * A failed request never retries silently: callers get a typed outcome and
 * decide (the UI offers an explicit retry button).
 */

import type {
  ConflictJson,
  GraphJson,
  PlanJson,
  StateJson,
  SyncReportJson,
} from "./types.js";

export type PlanOutcome =
  | { kind: "applied"; report: SyncReportJson }
  | { kind: "rejected"; status: number; reason: string }
  | { kind: "unreachable"; reason: string };

export class ReconcileApi {
  constructor(private base: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) {
      throw new Error(`GET ${path}: ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  async state(): Promise<StateJson> {
    return this.getJson<StateJson>("/state");
  }

  async graph(replica: string): Promise<GraphJson> {
    return this.getJson<GraphJson>(`/graph/${replica}`);
  }

  async conflicts(): Promise<ConflictJson[]> {
    const body = await this.getJson<{ conflicts: ConflictJson[] }>("/conflicts");
    return body.conflicts;
  }

  /** Advance one scripted event; resolves to false once the script is done. */
  async step(): Promise<boolean> {
    const resp = await fetch(this.base + "/step", { method: "POST" });
    if (!resp.ok) throw new Error(`POST /step: ${resp.status}`);
    const body = (await resp.json()) as { done: boolean; remaining: number };
    return !body.done && body.remaining > 0;
  }

  async sync(from: string, to: string): Promise<SyncReportJson> {
    const resp = await fetch(
      this.base + `/sync?from=${encodeURIComponent(from)}&to=${encodeURIComponent(to)}`,
      { method: "POST" },
    );
    if (!resp.ok) throw new Error(`POST /sync: ${resp.status}`);
    const body = (await resp.json()) as { report: SyncReportJson };
    return body.report;
  }

  /** Submit a merge plan. Server-side rejections surface as "rejected". */
  async submitPlan(plan: PlanJson): Promise<PlanOutcome> {
    let resp: Response;
    try {
      resp = await fetch(this.base + "/plan", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(plan),
      });
    } catch (err) {
      return { kind: "unreachable", reason: String(err) };
    }
    const body = (await resp.json()) as { report?: SyncReportJson; error?: string };
    if (resp.ok && body.report) {
      return { kind: "applied", report: body.report };
    }
    return {
      kind: "rejected",
      status: resp.status,
      reason: body.error ?? `status ${resp.status}`,
    };
  }
}
