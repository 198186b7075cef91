// Marker color legend: blue normal, green working, red error, gray offline/stale.

export type MarkerColor = "blue" | "green" | "red" | "gray";

const WORKING = new Set(["assigned", "pickup", "guiding", "returning"]);

export function statusColor(status: string, stale: boolean): MarkerColor {
  if (stale || status === "offline") return "gray";
  if (status === "error") return "red";
  if (WORKING.has(status)) return "green";
  if (status === "idle" || status === "charging") return "blue";
  return "gray"; // unknown renders as unknown
}

export const COLOR_HEX: Record<MarkerColor, string> = {
  blue: "#2f6fe4",
  green: "#2da44e",
  red: "#d3312f",
  gray: "#8b949e",
};
