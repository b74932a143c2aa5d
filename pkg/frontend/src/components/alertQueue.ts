import type { AlertPage } from "../api.js";

export interface AlertQueueHandlers {
  onSelect(alertId: string): void;
  onRetry(): void;
}

export function renderAlertQueue(
  root: HTMLElement,
  page: AlertPage | null,
  error: string | null,
  selectedId: string | null,
  handlers: AlertQueueHandlers,
): void {
  root.innerHTML = "";
  if (error !== null) {
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.textContent = `Could not load alerts: ${error}`;
    const retry = document.createElement("button");
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => handlers.onRetry());
    banner.appendChild(retry);
    root.appendChild(banner);
    return;
  }
  if (page === null || page.items.length === 0) {
    const empty = document.createElement("div");
    empty.className = "empty-state";
    empty.textContent = "No alerts to review.";
    root.appendChild(empty);
    return;
  }
  const list = document.createElement("ul");
  list.className = "alert-list";
  for (const item of page.items) {
    const row = document.createElement("li");
    row.className = "alert-row" + (item.alert_id === selectedId ? " selected" : "");
    row.dataset.alertId = item.alert_id;
    const id = document.createElement("span");
    id.className = "alert-id";
    id.textContent = item.alert_id;
    const confidence = document.createElement("span");
    confidence.className = "alert-confidence";
    confidence.textContent = item.model_confidence.toFixed(3);
    row.append(id, confidence);
    row.addEventListener("click", () => handlers.onSelect(item.alert_id));
    list.appendChild(row);
  }
  root.appendChild(list);
}
