// Event-sourcing checks over a stream recorded from a real 10-robot run
// (fixtures/stream.json: two guide jobs, the second fails by injected fault).

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { statusColor } from "../src/colors.js";
import {
  HistoryBuffer,
  MAX_PATH_POINTS,
  emptyState,
  foldEvent,
  foldHistory,
  scrub,
  sortedRobots,
  unacknowledged,
} from "../src/state.js";
import type { MonitorEvent } from "../src/types.js";

const FIXTURE: MonitorEvent[] = JSON.parse(
  readFileSync(join(__dirname, "..", "fixtures", "stream.json"), "utf-8"),
);

const finalState = foldHistory(FIXTURE);

describe("fixture stream fold", () => {
  it("shows all ten guide markers", () => {
    const guides = sortedRobots(finalState).filter((m) => m.kind === "guide");
    expect(guides.map((m) => m.robotId)).toEqual(
      Array.from({ length: 10 }, (_, i) => `g${String(i + 1).padStart(2, "0")}`),
    );
    for (const marker of guides) {
      expect(marker.x).not.toBeNull();
      expect(marker.batteryPct).not.toBeNull();
    }
  });

  it("marker colors follow the status legend over the whole run", () => {
    const seen = new Set<string>();
    const state = emptyState();
    for (const event of FIXTURE) {
      foldEvent(state, event);
      if (event.kind !== "shadow_update") continue;
      const marker = state.robots[(event.payload as { robot_id: string }).robot_id];
      seen.add(statusColor(marker.status, marker.stale));
    }
    expect(seen).toContain("blue"); // idle
    expect(seen).toContain("green"); // pickup/guiding/returning
    expect(seen).toContain("red"); // injected fault
  });

  it("faulted robot shows a red marker at the moment of the error", () => {
    const errorIndex = FIXTURE.findIndex(
      (e) =>
        e.kind === "shadow_update" &&
        (e.payload as { robot_id?: string }).robot_id === "g02" &&
        (e.payload as { effective_status?: string }).effective_status === "error",
    );
    expect(errorIndex).toBeGreaterThan(0);
    const atError = scrub(FIXTURE, errorIndex + 1);
    const g02 = atError.robots["g02"];
    expect(statusColor(g02.status, g02.stale)).toBe("red");
    // after the abort lands the robot recovers to idle (blue) in the live view
    const g02Final = finalState.robots["g02"];
    expect(g02Final.status).toBe("idle");
  });

  it("tracks both jobs to their terminal states", () => {
    expect(finalState.jobs["job-0001"].state).toBe("completed");
    expect(finalState.jobs["job-0002"].state).toBe("failed");
    expect(finalState.jobs["job-0002"].history.length).toBe(6);
  });

  it("raises a pop-up for the failure notification", () => {
    const open = unacknowledged(finalState);
    expect(open.some((n) => n.severity === "error" && n.message.includes("job-0002"))).toBe(true);
  });
});

describe("scrub (slider) semantics", () => {
  it("cursor 0 is the initial empty view", () => {
    expect(scrub(FIXTURE, 0)).toEqual(emptyState());
  });

  it("cursor at the end equals the live fold exactly", () => {
    expect(scrub(FIXTURE, FIXTURE.length)).toEqual(finalState);
  });

  it("equals the incremental live fold at every sampled cursor", () => {
    const incremental = emptyState();
    const cursors = new Set([1, 50, 137, 300, FIXTURE.length - 1]);
    for (let i = 0; i < FIXTURE.length; i++) {
      foldEvent(incremental, FIXTURE[i]);
      if (cursors.has(i + 1)) {
        expect(scrub(FIXTURE, i + 1)).toEqual(incremental);
      }
    }
  });

  it("error marker is absent before the failure event and present after", () => {
    const errorIndex = FIXTURE.findIndex(
      (e) => e.kind === "notification" && (e.payload as { severity?: string }).severity === "error",
    );
    expect(errorIndex).toBeGreaterThan(0);
    const before = scrub(FIXTURE, errorIndex);
    expect(unacknowledged(before).some((n) => n.severity === "error")).toBe(false);
    const after = scrub(FIXTURE, errorIndex + 1);
    expect(unacknowledged(after).some((n) => n.severity === "error")).toBe(true);
  });

  it("never mutates the live state", () => {
    const liveSnapshot = JSON.parse(JSON.stringify(finalState));
    scrub(FIXTURE, 42);
    scrub(FIXTURE, FIXTURE.length);
    expect(finalState).toEqual(liveSnapshot);
  });
});

describe("fold mechanics", () => {
  it("drops replayed duplicate event ids", () => {
    const state = emptyState();
    foldEvent(state, FIXTURE[0]);
    const before = JSON.parse(JSON.stringify(state));
    foldEvent(state, FIXTURE[0]);
    expect(state).toEqual(before);
  });

  it("bounds each robot path to the window size", () => {
    const g01 = finalState.robots["g01"];
    expect(g01.path.length).toBeLessThanOrEqual(MAX_PATH_POINTS);
    expect(g01.path.length).toBeGreaterThan(1); // it moved during its job
  });

  it("history buffer is bounded", () => {
    const buffer = new HistoryBuffer(10);
    for (const event of FIXTURE.slice(0, 50)) buffer.push(event);
    expect(buffer.length).toBe(10);
    expect(buffer.all()[0]).toEqual(FIXTURE[40]);
  });

  it("event ids fold monotonically", () => {
    let last = 0;
    for (const event of FIXTURE) {
      expect(event.event_id).toBeGreaterThan(last);
      last = event.event_id;
    }
    expect(finalState.lastEventId).toBe(last);
  });
});
