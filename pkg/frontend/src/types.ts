/** Wire types mirroring the server's JSON exactly; no client-side invention. */

export interface ActionJson {
  op: string;
  reg: number;
  value?: unknown;
  t?: number;
}

export interface NodeJson {
  id: string;
  actions: ActionJson[];
  premises: string[];
}

export interface GraphJson {
  constructors: Record<string, string>;
  nodes: NodeJson[];
  rebases: Record<string, string[]>;
}

export interface ConflictJson {
  replica: string;
  kind: string;
  trigger: string;
  trigger_actions?: ActionJson[];
  trigger_premises?: string[];
  conflicting_premises: string[];
  scope: string[];
  participants: string[];
}

export interface RegisterInfo {
  index: number;
  kind: string;
}

export interface StateJson {
  scenario: string;
  registers: RegisterInfo[];
  replicas: Record<string, Record<string, unknown>>;
  remaining_events: number;
}

export interface SyncReportJson {
  applied: string[];
  skipped_cancelled: string[];
  rolled_back: string[];
  conflicts: unknown[];
  resolved: unknown[];
}

export interface PlanJson {
  trigger: string;
  keep: string[];
  cancel: string[];
  merged: ActionJson[];
}

export function actionLabel(a: ActionJson): string {
  const parts = [a.op, `r${a.reg}`];
  if (a.value !== undefined && a.value !== null) parts.push(String(a.value));
  if (a.t !== undefined && a.t !== null) parts.push(`t${a.t}`);
  return parts.join(" ");
}
