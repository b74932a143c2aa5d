import type { AlertView } from "../api.js";

const TOP_BARS = 15;

/** Panel B: horizontal contribution bars in the backend's order (largest
 * magnitude first). Positive and negative contributions get distinct
 * classes; with many features only the top bars show until toggled. */
export function renderShapBars(root: HTMLElement, view: AlertView, showAll = false): void {
  root.innerHTML = "";
  const bars = view.shap_bars;
  const visible = showAll ? bars : bars.slice(0, TOP_BARS);
  const maxMagnitude = Math.max(...bars.map((b) => Math.abs(b.phi)), 0);

  const list = document.createElement("div");
  list.className = "shap-bars";
  for (const bar of visible) {
    const row = document.createElement("div");
    row.className = "shap-bar " + (bar.phi >= 0 ? "positive" : "negative");
    row.title = `${bar.feature_name}: value ${bar.feature_value}, contribution ${bar.phi}`;
    row.dataset.phi = String(bar.phi);

    const name = document.createElement("span");
    name.className = "bar-name";
    name.textContent = bar.feature_name;

    const track = document.createElement("span");
    track.className = "bar-track";
    const fill = document.createElement("span");
    fill.className = "bar-fill";
    const share = maxMagnitude === 0 ? 0 : Math.abs(bar.phi) / maxMagnitude;
    fill.style.width = `${Math.round(share * 100)}%`;
    track.appendChild(fill);

    const amount = document.createElement("span");
    amount.className = "bar-amount";
    amount.textContent = bar.phi.toFixed(4);

    row.append(name, track, amount);
    list.appendChild(row);
  }
  root.appendChild(list);

  if (bars.length > TOP_BARS) {
    const toggle = document.createElement("button");
    toggle.className = "show-all-toggle";
    toggle.textContent = showAll ? `Show top ${TOP_BARS}` : `Show all ${bars.length}`;
    toggle.addEventListener("click", () => renderShapBars(root, view, !showAll));
    root.appendChild(toggle);
  }
}
