import type { NeighborhoodPoint, NeighborhoodView } from "../api.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 420;
const HEIGHT = 360;
const MARGIN = 24;

// Fixed, documented color mapping: true positives, true negatives, and
// cases whose label was never verified.
export const COLOR_POSITIVE = "#d1495b";
export const COLOR_NEGATIVE = "#3a7ca5";
export const COLOR_UNVERIFIED = "#b49b2e";

export function pointColor(point: NeighborhoodPoint): string {
  if (point.label_verified === false && !point.is_query) return COLOR_UNVERIFIED;
  return point.true_label === 1 ? COLOR_POSITIVE : COLOR_NEGATIVE;
}

interface Placed {
  point: NeighborhoodPoint;
  px: number;
  py: number;
}

/** Map embedding coordinates to pixels. The layout is relative only, so the
 * plot shows no axes; coordinates come from the API untouched. When every
 * point coincides, the display jitters them apart deterministically and says
 * so; the underlying coordinates are not modified. */
function place(points: NeighborhoodPoint[]): { placed: Placed[]; degenerate: boolean } {
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const spanX = Math.max(...xs) - Math.min(...xs);
  const spanY = Math.max(...ys) - Math.min(...ys);
  const span = Math.max(spanX, spanY);
  const degenerate = span === 0 && points.length > 1;
  const cx = (Math.min(...xs) + Math.max(...xs)) / 2;
  const cy = (Math.min(...ys) + Math.max(...ys)) / 2;
  const scale = degenerate ? 1 : (Math.min(WIDTH, HEIGHT) / 2 - MARGIN) / (span / 2 || 1);
  const placed = points.map((point, i) => {
    let px = WIDTH / 2 + (point.x - cx) * scale;
    let py = HEIGHT / 2 - (point.y - cy) * scale;
    if (degenerate) {
      // display-only jitter on a small ring, stable across renders
      const angle = (2 * Math.PI * i) / points.length;
      px += Math.cos(angle) * 18;
      py += Math.sin(angle) * 18;
    }
    return { point, px, py };
  });
  return { placed, degenerate };
}

export interface NeighborhoodHandlers {
  onHover?(pointId: string | null): void;
}

export function renderNeighborhood(
  root: HTMLElement,
  view: NeighborhoodView,
  handlers: NeighborhoodHandlers = {},
): void {
  root.innerHTML = "";

  const header = document.createElement("div");
  header.className = "neighborhood-header";
  header.textContent =
    `k=${view.k} · retrieval ${view.retrieval_kind} · view ${view.viz_kind}` +
    ` · stress ${view.stress.toFixed(4)}`;
  root.appendChild(header);

  const { placed, degenerate } = place(view.points);
  if (degenerate) {
    const notice = document.createElement("div");
    notice.className = "degenerate-notice";
    notice.textContent = "All cases coincide under this distance; points are spread for display only.";
    root.appendChild(notice);
  }

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "neighborhood-plot");

  for (const { point, px, py } of placed) {
    let marker: SVGElement;
    if (point.is_query) {
      // the query is pinned with a distinct diamond marker
      marker = document.createElementNS(SVG_NS, "rect");
      marker.setAttribute("x", String(px - 7));
      marker.setAttribute("y", String(py - 7));
      marker.setAttribute("width", "14");
      marker.setAttribute("height", "14");
      marker.setAttribute("transform", `rotate(45 ${px} ${py})`);
      marker.setAttribute("class", "point query-point");
      marker.setAttribute("fill", "#222222");
    } else {
      marker = document.createElementNS(SVG_NS, "circle");
      marker.setAttribute("cx", String(px));
      marker.setAttribute("cy", String(py));
      marker.setAttribute("r", "6");
      marker.setAttribute("class", "point neighbor-point");
      marker.setAttribute("fill", pointColor(point));
    }
    marker.dataset.pointId = point.id;
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = point.is_query
      ? `${point.id} (query)`
      : `${point.id} · class ${point.true_label}${point.label_verified ? "" : " (unverified)"}` +
        ` · retrieval d=${point.retrieval_distance} · view d=${point.viz_distance_to_query}`;
    marker.appendChild(title);
    marker.addEventListener("mouseenter", () => handlers.onHover?.(point.id));
    marker.addEventListener("mouseleave", () => handlers.onHover?.(null));
    svg.appendChild(marker);
  }
  root.appendChild(svg);

  const legend = document.createElement("div");
  legend.className = "legend";
  legend.innerHTML =
    `<span class="legend-item"><span class="swatch" style="background:${COLOR_POSITIVE}"></span>positive</span>` +
    `<span class="legend-item"><span class="swatch" style="background:${COLOR_NEGATIVE}"></span>negative</span>` +
    `<span class="legend-item"><span class="swatch" style="background:${COLOR_UNVERIFIED}"></span>unverified</span>` +
    `<span class="legend-item"><span class="swatch query-swatch"></span>query</span>`;
  root.appendChild(legend);
}
