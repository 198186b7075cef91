// Thin read-only REST client; the abort POST is the single mutating call.

import type { MonitorEvent, ShadowSnapshot } from "./types.js";

export async function fetchRobots(baseUrl: string): Promise<ShadowSnapshot[]> {
  const resp = await fetch(`${baseUrl}/v1/robots`);
  if (!resp.ok) throw new Error(`GET /v1/robots -> ${resp.status}`);
  return (await resp.json()) as ShadowSnapshot[];
}

export interface JobDetail {
  job_id: string;
  state: string;
  assigned_robot: string | null;
  failure_reason: string | null;
  request: { destination_id: string; reception_robot: string };
  transitions: Array<{ from: string; to: string; cause: string; at_ms: number }>;
}

export async function fetchJobs(baseUrl: string): Promise<JobDetail[]> {
  const resp = await fetch(`${baseUrl}/v1/jobs`);
  if (!resp.ok) throw new Error(`GET /v1/jobs -> ${resp.status}`);
  return (await resp.json()) as JobDetail[];
}

export async function abortRobot(baseUrl: string, robotId: string): Promise<{ ok: boolean; detail: string }> {
  const resp = await fetch(`${baseUrl}/v1/robots/${robotId}/commands`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ kind: "abort" }),
  });
  const body = await resp.json().catch(() => ({}));
  return { ok: resp.ok, detail: resp.ok ? `job ${body.job_id} canceled` : `${body.code}: ${body.message}` };
}

export async function loadFixture(url: string): Promise<MonitorEvent[]> {
  const resp = await fetch(url);
  if (!resp.ok) throw new Error(`fixture ${url} -> ${resp.status}`);
  return (await resp.json()) as MonitorEvent[];
}
