import { describe, expect, it } from "vitest";

import { statusColor } from "../src/colors.js";

describe("marker color legend", () => {
  it("idle robots render blue", () => {
    expect(statusColor("idle", false)).toBe("blue");
  });

  it("working statuses render green", () => {
    for (const status of ["assigned", "pickup", "guiding", "returning"]) {
      expect(statusColor(status, false)).toBe("green");
    }
  });

  it("error renders red", () => {
    expect(statusColor("error", false)).toBe("red");
  });

  it("offline or stale renders gray regardless of status", () => {
    expect(statusColor("offline", false)).toBe("gray");
    expect(statusColor("idle", true)).toBe("gray");
    expect(statusColor("guiding", true)).toBe("gray");
  });

  it("unknown statuses degrade to gray markers", () => {
    expect(statusColor("mystery", false)).toBe("gray");
  });
});
