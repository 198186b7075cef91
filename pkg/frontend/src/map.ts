// 2D facility plan rendered as SVG from destination coordinates and markers.

import { COLOR_HEX, statusColor } from "./colors.js";
import type { DashState, RobotMarker } from "./state.js";
import { sortedRobots } from "./state.js";

export interface Destination {
  id: string;
  x: number;
  y: number;
  floor: number;
}

// mirror of the server's default destination table; override via config
export const DEFAULT_DESTINATIONS: Destination[] = [
  { id: "atrium", x: 50, y: 80, floor: 0 },
  { id: "north-gate", x: 200, y: 10, floor: 0 },
  { id: "food-court", x: 120, y: 160, floor: 1 },
  { id: "info-desk", x: 10, y: 5, floor: 0 },
  { id: "east-wing", x: 420, y: 60, floor: 0 },
];

const SVG_NS = "http://www.w3.org/2000/svg";

interface Bounds {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

function bounds(markers: RobotMarker[], destinations: Destination[]): Bounds {
  const xs: number[] = [0];
  const ys: number[] = [0];
  for (const d of destinations) {
    xs.push(d.x);
    ys.push(d.y);
  }
  for (const m of markers) {
    if (m.x !== null) xs.push(m.x);
    if (m.y !== null) ys.push(m.y);
  }
  return {
    minX: Math.min(...xs) - 20,
    minY: Math.min(...ys) - 20,
    maxX: Math.max(...xs) + 20,
    maxY: Math.max(...ys) + 20,
  };
}

function el(name: string, attrs: Record<string, string | number>): Element {
  const node = document.createElementNS(SVG_NS, name);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, String(value));
  return node;
}

export function renderMap(
  svg: SVGSVGElement,
  state: DashState,
  destinations: Destination[],
  selected: string | null,
  destinationOfJob: (jobId: string) => Destination | undefined,
): void {
  const markers = sortedRobots(state);
  const b = bounds(markers, destinations);
  svg.setAttribute("viewBox", `${b.minX} ${b.minY} ${b.maxX - b.minX} ${b.maxY - b.minY}`);
  svg.replaceChildren();

  for (const dest of destinations) {
    svg.appendChild(el("rect", { x: dest.x - 4, y: dest.y - 4, width: 8, height: 8, fill: "#3a3f45" }));
    const label = el("text", { x: dest.x + 6, y: dest.y + 3, "font-size": 9, fill: "#9aa2ab" });
    label.textContent = dest.id;
    svg.appendChild(label);
  }

  for (const marker of markers) {
    if (marker.x === null || marker.y === null) continue;
    if (marker.path.length > 1) {
      const points = marker.path.map(([x, y]) => `${x},${y}`).join(" ");
      svg.appendChild(el("polyline", { points, fill: "none", stroke: "#4a5561", "stroke-width": 1 }));
    }
    if (marker.currentJob) {
      const dest = destinationOfJob(marker.currentJob);
      if (dest) {
        svg.appendChild(
          el("line", {
            x1: marker.x, y1: marker.y, x2: dest.x, y2: dest.y,
            stroke: "#2da44e", "stroke-width": 1, "stroke-dasharray": "4 3",
          }),
        );
      }
    }
    const color = COLOR_HEX[statusColor(marker.status, marker.stale)];
    const circle = el("circle", {
      cx: marker.x, cy: marker.y, r: marker.kind === "guide" ? 6 : 5,
      fill: color,
      stroke: marker.robotId === selected ? "#ffffff" : "#14171a",
      "stroke-width": marker.robotId === selected ? 2.5 : 1,
    });
    circle.setAttribute("data-robot", marker.robotId);
    svg.appendChild(circle);
    const label = el("text", { x: marker.x + 8, y: marker.y - 6, "font-size": 10, fill: "#d8dee5" });
    label.textContent = marker.stale ? `${marker.robotId} (stale)` : marker.robotId;
    svg.appendChild(label);
  }
}
