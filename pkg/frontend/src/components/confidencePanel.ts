import type { AlertView } from "../api.js";

/** Panel A: the model's confidence for the selected alert, shown verbatim. */
export function renderConfidencePanel(root: HTMLElement, view: AlertView | null): void {
  root.innerHTML = "";
  if (view === null) {
    root.textContent = "Select an alert to inspect.";
    return;
  }
  const label = document.createElement("div");
  label.className = "confidence-label";
  label.textContent = `Model confidence for ${view.alert_id}`;
  const value = document.createElement("div");
  value.className = "confidence-value";
  value.textContent = view.model_confidence.toFixed(4);
  root.append(label, value);
}
