// Wire shapes consumed from the management service (REST + SSE payloads).

export interface MonitorEvent {
  event_id: number;
  kind: "shadow_update" | "job_transition" | "notification" | string;
  payload: Record<string, unknown>;
  at_ms: number;
}

export interface ShadowField {
  value: unknown;
  seq: number;
  last_update_ms: number | null;
  stale: boolean;
  reported: boolean;
}

export interface ShadowSnapshot {
  robot_id: string;
  kind: string;
  effective_status: string;
  current_job: string | null;
  fields: Record<string, ShadowField>;
}

export interface PositionValue {
  x: number;
  y: number;
  floor: number;
}

export interface JobTransitionPayload {
  job_id: string;
  robot_id: string | null;
  from: string;
  to: string;
  cause: string;
  at_ms: number;
}

export interface NotificationPayload {
  severity: "info" | "warning" | "error" | string;
  message: string;
  job_id?: string;
}
