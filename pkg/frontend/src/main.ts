// Dashboard bootstrap: live SSE mode or fixture playback, map + panes + slider.
//
// URL parameters:
//   ?server=http://127.0.0.1:8080   management service base URL (default)
//   ?fixture=fixtures/stream.json   offline mode: scrub a recorded stream

import { abortRobot, fetchJobs, fetchRobots, loadFixture } from "./api.js";
import { COLOR_HEX, statusColor } from "./colors.js";
import { DEFAULT_DESTINATIONS, renderMap, type Destination } from "./map.js";
import {
  HistoryBuffer,
  emptyState,
  foldEvent,
  scrub,
  sortedRobots,
  unacknowledged,
  type DashState,
} from "./state.js";
import { consumeStream } from "./stream.js";
import type { MonitorEvent, ShadowSnapshot } from "./types.js";

const params = new URLSearchParams(window.location.search);
const SERVER = (params.get("server") ?? "http://127.0.0.1:8080").replace(/\/$/, "");
const FIXTURE = params.get("fixture");

const svg = document.getElementById("map") as unknown as SVGSVGElement;
const detailPane = document.getElementById("detail")!;
const notesPane = document.getElementById("notifications")!;
const banner = document.getElementById("banner")!;
const slider = document.getElementById("slider") as HTMLInputElement;
const liveButton = document.getElementById("live-button") as HTMLButtonElement;
const modeLabel = document.getElementById("mode-label")!;

let live: DashState = emptyState();
const history = new HistoryBuffer(10_000);
let replayCursor: number | null = null; // null = live mode
let selectedRobot: string | null = null;
const jobDestinations = new Map<string, string>();
const destinations: Destination[] = DEFAULT_DESTINATIONS;

function destinationOfJob(jobId: string): Destination | undefined {
  const destId = jobDestinations.get(jobId);
  return destinations.find((d) => d.id === destId);
}

function currentState(): DashState {
  return replayCursor === null ? live : scrub(history.all(), replayCursor);
}

function render(): void {
  const state = currentState();
  modeLabel.textContent = replayCursor === null ? "LIVE" : `REPLAY ${replayCursor}/${history.length}`;
  renderMap(svg, state, destinations, selectedRobot, destinationOfJob);
  renderDetail(state);
  renderNotifications(state);
  if (replayCursor === null) {
    slider.max = String(history.length);
    slider.value = String(history.length);
  }
}

function renderDetail(state: DashState): void {
  const rows: string[] = [];
  for (const marker of sortedRobots(state)) {
    const color = COLOR_HEX[statusColor(marker.status, marker.stale)];
    const battery = marker.batteryPct === null ? "-" : `${marker.batteryPct.toFixed(1)}%`;
    const mileage = marker.mileageM === null ? "-" : `${(marker.mileageM / 1000).toFixed(2)} km`;
    rows.push(
      `<tr data-robot="${marker.robotId}" class="${marker.robotId === selectedRobot ? "selected" : ""}">` +
        `<td><span class="dot" style="background:${color}"></span>${marker.robotId}</td>` +
        `<td>${marker.status}${marker.stale ? " (stale)" : ""}</td><td>${battery}</td><td>${mileage}</td>` +
        `<td>${marker.currentJob ?? "-"}</td></tr>`,
    );
  }
  let jobsHtml = "";
  const jobs = Object.values(state.jobs).sort((a, b) => b.atMs - a.atMs).slice(0, 12);
  for (const job of jobs) {
    jobsHtml += `<li><b>${job.jobId}</b> ${job.state} (${job.robotId ?? "-"}) — ${job.cause}</li>`;
  }
  const abort =
    selectedRobot && replayCursor === null
      ? `<button id="abort-button">abort ${selectedRobot}</button>`
      : "";
  detailPane.innerHTML =
    `<table><thead><tr><th>robot</th><th>status</th><th>battery</th><th>mileage</th><th>job</th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>${abort}<h3>jobs</h3><ul>${jobsHtml}</ul>`;
  detailPane.querySelectorAll("tr[data-robot]").forEach((row) => {
    row.addEventListener("click", () => {
      selectedRobot = row.getAttribute("data-robot");
      render();
    });
  });
  const abortButton = document.getElementById("abort-button");
  if (abortButton) {
    abortButton.addEventListener("click", async () => {
      const result = await abortRobot(SERVER, selectedRobot!);
      banner.textContent = result.detail;
      banner.className = result.ok ? "ok" : "warn";
    });
  }
}

function renderNotifications(state: DashState): void {
  const open = unacknowledged(state);
  const items = open
    .slice(-8)
    .reverse()
    .map(
      (n) =>
        `<li class="${n.severity}"><b>${n.severity}</b> ${n.message}` +
        (replayCursor === null ? ` <a href="#" data-ack="${n.eventId}">ack</a>` : "") +
        `</li>`,
    );
  notesPane.innerHTML = `<h3>notifications (${open.length})</h3><ul>${items.join("")}</ul>`;
  notesPane.querySelectorAll("a[data-ack]").forEach((link) => {
    link.addEventListener("click", (ev) => {
      ev.preventDefault();
      const id = Number(link.getAttribute("data-ack"));
      const note = live.notifications.find((n) => n.eventId === id);
      if (note) note.acknowledged = true;
      render();
    });
  });
}

function seedFromSnapshot(robots: ShadowSnapshot[]): void {
  let id = 0;
  for (const shadow of robots) {
    const event: MonitorEvent = { event_id: ++id, kind: "shadow_update", payload: shadow as never, at_ms: Date.now() };
    foldEvent(live, event);
    history.push(event);
  }
  live.lastEventId = 0; // stream ids restart from the server's counter
}

async function refreshJobDestinations(): Promise<void> {
  try {
    for (const job of await fetchJobs(SERVER)) {
      jobDestinations.set(job.job_id, job.request.destination_id);
    }
  } catch {
    // jobs pane degrades gracefully when the fetch fails
  }
}

slider.addEventListener("input", () => {
  replayCursor = Number(slider.value);
  if (replayCursor >= history.length) replayCursor = null; // back at the head = live
  render();
});
liveButton.addEventListener("click", () => {
  replayCursor = null;
  render();
});

async function startLive(): Promise<void> {
  banner.textContent = `connecting to ${SERVER}`;
  try {
    seedFromSnapshot(await fetchRobots(SERVER));
  } catch (err) {
    banner.textContent = `cannot reach ${SERVER}: ${err}`;
    banner.className = "warn";
  }
  await refreshJobDestinations();
  consumeStream(SERVER, {
    onEvent(event) {
      foldEvent(live, event);
      history.push(event);
      if (event.kind === "job_transition") void refreshJobDestinations();
      render();
    },
    onStatus(status) {
      banner.textContent = status === "live" ? `connected to ${SERVER}` : `connection ${status}`;
      banner.className = status === "live" ? "ok" : "warn";
    },
  });
  render();
}

async function startFixture(url: string): Promise<void> {
  const events = await loadFixture(url);
  for (const event of events) {
    foldEvent(live, event);
    history.push(event);
  }
  banner.textContent = `fixture mode: ${url} (${events.length} events)`;
  banner.className = "ok";
  render();
}

if (FIXTURE) {
  void startFixture(FIXTURE);
} else {
  void startLive();
}
