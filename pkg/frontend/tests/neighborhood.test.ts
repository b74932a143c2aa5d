import { beforeEach, describe, expect, it } from "vitest";

import {
  COLOR_NEGATIVE,
  COLOR_POSITIVE,
  COLOR_UNVERIFIED,
  renderNeighborhood,
} from "../src/components/neighborhoodPlot.js";
import { neighborhoodFixture } from "./fixtures.js";

describe("neighborhood scatter", () => {
  let root: HTMLElement;

  beforeEach(() => {
    root = document.createElement("div");
    document.body.appendChild(root);
  });

  it("renders exactly k+1 points with one query marker", () => {
    renderNeighborhood(root, neighborhoodFixture(5));
    expect(root.querySelectorAll(".point")).toHaveLength(6);
    expect(root.querySelectorAll(".query-point")).toHaveLength(1);
  });

  it("colors neighbors by true class with a third color for unverified", () => {
    renderNeighborhood(root, neighborhoodFixture(5));
    const fills = [...root.querySelectorAll<SVGElement>(".neighbor-point")].map((p) =>
      p.getAttribute("fill"),
    );
    expect(fills).toContain(COLOR_POSITIVE);
    expect(fills).toContain(COLOR_NEGATIVE);
    expect(fills).toContain(COLOR_UNVERIFIED);
  });

  it("all-positive neighborhoods use a single neighbor color", () => {
    const view = neighborhoodFixture(4);
    for (const p of view.points) {
      if (!p.is_query) {
        p.true_label = 1;
        p.label_verified = true;
      }
    }
    renderNeighborhood(root, view);
    const fills = new Set(
      [...root.querySelectorAll<SVGElement>(".neighbor-point")].map((p) => p.getAttribute("fill")),
    );
    expect(fills).toEqual(new Set([COLOR_POSITIVE]));
  });

  it("shows the stress readout and echoes the request parameters", () => {
    renderNeighborhood(root, neighborhoodFixture(3));
    const header = root.querySelector(".neighborhood-header")!.textContent!;
    expect(header).toContain("stress 0.0421");
    expect(header).toContain("k=3");
    expect(header).toContain("retrieval S");
    expect(header).toContain("view F");
  });

  it("hides axes (pure relative layout)", () => {
    renderNeighborhood(root, neighborhoodFixture(3));
    expect(root.querySelector("svg .axis")).toBeNull();
    expect(root.querySelectorAll("svg line")).toHaveLength(0);
  });

  it("jitters coincident embeddings for display and says so", () => {
    renderNeighborhood(root, neighborhoodFixture(4, true));
    expect(root.querySelector(".degenerate-notice")).not.toBeNull();
    const circles = [...root.querySelectorAll<SVGElement>(".neighbor-point")];
    const positions = new Set(circles.map((c) => `${c.getAttribute("cx")},${c.getAttribute("cy")}`));
    expect(positions.size).toBe(circles.length); // spread apart on screen
  });

  it("tooltips carry id, class, and both distances", () => {
    renderNeighborhood(root, neighborhoodFixture(2));
    const title = root.querySelector(".neighbor-point title")!.textContent!;
    expect(title).toContain("c0");
    expect(title).toContain("class");
    expect(title).toContain("retrieval d=");
    expect(title).toContain("view d=");
  });

  it("reports hovered point ids", () => {
    const hovered: (string | null)[] = [];
    renderNeighborhood(root, neighborhoodFixture(2), { onHover: (id) => hovered.push(id) });
    const point = root.querySelector<SVGElement>(".neighbor-point")!;
    point.dispatchEvent(new Event("mouseenter"));
    point.dispatchEvent(new Event("mouseleave"));
    expect(hovered).toEqual(["c0", null]);
  });
});
