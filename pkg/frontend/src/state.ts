// Event-sourced dashboard state: fold monitor events into the view model.
//
// foldEvent mutates and returns the accumulator (the live path applies events
// incrementally); scrub() always refolds from the empty state, so replay can
// never leak into live state, let alone the server's.

import type {
  JobTransitionPayload,
  MonitorEvent,
  NotificationPayload,
  PositionValue,
  ShadowSnapshot,
} from "./types.js";

export const MAX_PATH_POINTS = 50;

export interface RobotMarker {
  robotId: string;
  kind: string;
  status: string;
  stale: boolean;
  x: number | null;
  y: number | null;
  floor: number;
  batteryPct: number | null;
  mileageM: number | null;
  currentJob: string | null;
  path: Array<[number, number]>;
  lastUpdateMs: number | null;
}

export interface JobRow {
  jobId: string;
  state: string;
  robotId: string | null;
  cause: string;
  atMs: number;
  history: Array<{ from: string; to: string; cause: string; atMs: number }>;
}

export interface PopupNote {
  eventId: number;
  severity: string;
  message: string;
  atMs: number;
  acknowledged: boolean;
}

export interface DashState {
  robots: Record<string, RobotMarker>;
  jobs: Record<string, JobRow>;
  notifications: PopupNote[];
  lastEventId: number;
}

export function emptyState(): DashState {
  return { robots: {}, jobs: {}, notifications: [], lastEventId: 0 };
}

function asNumber(value: unknown): number | null {
  return typeof value === "number" && Number.isFinite(value) ? value : null;
}

function applyShadow(state: DashState, shadow: ShadowSnapshot): void {
  const prev = state.robots[shadow.robot_id];
  const marker: RobotMarker = prev ?? {
    robotId: shadow.robot_id,
    kind: shadow.kind,
    status: "offline",
    stale: true,
    x: null,
    y: null,
    floor: 0,
    batteryPct: null,
    mileageM: null,
    currentJob: null,
    path: [],
    lastUpdateMs: null,
  };
  marker.kind = shadow.kind;
  marker.status = shadow.effective_status;
  marker.currentJob = shadow.current_job;
  const position = shadow.fields["position"];
  marker.stale = position ? position.stale : true;
  const pos = position?.value as PositionValue | null | undefined;
  if (pos && typeof pos.x === "number") {
    const moved = marker.x !== pos.x || marker.y !== pos.y;
    marker.x = pos.x;
    marker.y = pos.y;
    marker.floor = pos.floor ?? 0;
    if (moved) {
      marker.path.push([pos.x, pos.y]);
      if (marker.path.length > MAX_PATH_POINTS) marker.path.shift();
    }
  }
  marker.batteryPct = asNumber(shadow.fields["battery"]?.value);
  marker.mileageM = asNumber(shadow.fields["mileage"]?.value);
  marker.lastUpdateMs = position?.last_update_ms ?? marker.lastUpdateMs;
  state.robots[shadow.robot_id] = marker;
}

function applyTransition(state: DashState, t: JobTransitionPayload): void {
  const row = state.jobs[t.job_id] ?? {
    jobId: t.job_id,
    state: t.to,
    robotId: t.robot_id,
    cause: t.cause,
    atMs: t.at_ms,
    history: [],
  };
  row.state = t.to;
  row.robotId = t.robot_id ?? row.robotId;
  row.cause = t.cause;
  row.atMs = t.at_ms;
  row.history.push({ from: t.from, to: t.to, cause: t.cause, atMs: t.at_ms });
  state.jobs[t.job_id] = row;
}

export function foldEvent(state: DashState, event: MonitorEvent): DashState {
  if (event.event_id <= state.lastEventId) return state; // replayed duplicate
  state.lastEventId = event.event_id;
  if (event.kind === "shadow_update") {
    applyShadow(state, event.payload as unknown as ShadowSnapshot);
  } else if (event.kind === "job_transition") {
    applyTransition(state, event.payload as unknown as JobTransitionPayload);
  } else if (event.kind === "notification") {
    const note = event.payload as unknown as NotificationPayload;
    state.notifications.push({
      eventId: event.event_id,
      severity: note.severity,
      message: note.message,
      atMs: event.at_ms,
      acknowledged: false,
    });
  }
  return state;
}

export function foldHistory(events: MonitorEvent[], upTo?: number): DashState {
  const state = emptyState();
  const end = upTo === undefined ? events.length : Math.max(0, Math.min(upTo, events.length));
  for (let i = 0; i < end; i++) foldEvent(state, events[i]);
  return state;
}

/** Historical view at a cursor; pure over the buffer, never touches live state. */
export function scrub(history: MonitorEvent[], cursor: number): DashState {
  return foldHistory(history, cursor);
}

export function sortedRobots(state: DashState): RobotMarker[] {
  return Object.values(state.robots).sort((a, b) => a.robotId.localeCompare(b.robotId));
}

export function unacknowledged(state: DashState): PopupNote[] {
  return state.notifications.filter((n) => !n.acknowledged);
}

/** Client-side history buffer mirroring the gateway's bounded ring. */
export class HistoryBuffer {
  private events: MonitorEvent[] = [];

  constructor(readonly capacity: number = 10_000) {}

  push(event: MonitorEvent): void {
    this.events.push(event);
    if (this.events.length > this.capacity) this.events.shift();
  }

  get length(): number {
    return this.events.length;
  }

  all(): MonitorEvent[] {
    return this.events;
  }
}
