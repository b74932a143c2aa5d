import { beforeEach, describe, expect, it } from "vitest";

import { renderShapBars } from "../src/components/shapBars.js";
import { alertViewFixture } from "./fixtures.js";

describe("contribution bars", () => {
  let root: HTMLElement;

  beforeEach(() => {
    root = document.createElement("div");
    document.body.appendChild(root);
  });

  it("renders bars in descending |phi| order with one bar per feature", () => {
    const view = alertViewFixture(6);
    renderShapBars(root, view);
    const rows = [...root.querySelectorAll<HTMLElement>(".shap-bar")];
    expect(rows).toHaveLength(6);
    const magnitudes = rows.map((r) => Math.abs(Number(r.dataset.phi)));
    const sorted = [...magnitudes].sort((a, b) => b - a);
    expect(magnitudes).toEqual(sorted);
  });

  it("the largest-magnitude bar comes first regardless of sign", () => {
    const view = alertViewFixture(2);
    view.shap_bars = [
      { feature_name: "big", phi: 0.5, feature_value: 0 },
      { feature_name: "small", phi: -0.2, feature_value: 0 },
    ];
    renderShapBars(root, view);
    const first = root.querySelector<HTMLElement>(".shap-bar")!;
    expect(first.querySelector(".bar-name")!.textContent).toBe("big");
  });

  it("distinguishes positive and negative contributions", () => {
    renderShapBars(root, alertViewFixture(4));
    expect(root.querySelectorAll(".shap-bar.positive").length).toBeGreaterThan(0);
    expect(root.querySelectorAll(".shap-bar.negative").length).toBeGreaterThan(0);
  });

  it("renders zero-height bars for an all-zero vector", () => {
    const view = alertViewFixture(3);
    for (const bar of view.shap_bars) bar.phi = 0;
    renderShapBars(root, view);
    const fills = [...root.querySelectorAll<HTMLElement>(".bar-fill")];
    expect(fills).toHaveLength(3);
    expect(fills.every((f) => f.style.width === "0%")).toBe(true);
  });

  it("shows the top 15 with a toggle when there are many features", () => {
    renderShapBars(root, alertViewFixture(30));
    expect(root.querySelectorAll(".shap-bar")).toHaveLength(15);
    const toggle = root.querySelector<HTMLButtonElement>(".show-all-toggle")!;
    expect(toggle.textContent).toContain("30");
    toggle.click();
    expect(root.querySelectorAll(".shap-bar")).toHaveLength(30);
  });

  it("shows feature name, value, and contribution on hover", () => {
    renderShapBars(root, alertViewFixture(2));
    const first = root.querySelector<HTMLElement>(".shap-bar")!;
    expect(first.title).toContain("f0");
    expect(first.title).toContain("value");
    expect(first.title).toContain("contribution");
  });
});
