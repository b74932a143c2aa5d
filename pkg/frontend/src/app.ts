import { ApiClient, type AlertPage, type DistanceCode, type NeighborhoodView } from "./api.js";
import { debounce } from "./debounce.js";
import { DISTANCE_CODES, DISTANCE_LABELS, K_MAX, K_MIN, clampK, initialState } from "./state.js";
import { renderAlertQueue } from "./components/alertQueue.js";
import { renderConfidencePanel } from "./components/confidencePanel.js";
import { renderShapBars } from "./components/shapBars.js";
import { renderNeighborhood } from "./components/neighborhoodPlot.js";

export interface AppOptions {
  apiBaseUrl?: string;
  /** debounce for slider-driven refetches, in ms */
  sliderDebounceMs?: number;
}

interface Dom {
  queue: HTMLElement;
  confidence: HTMLElement;
  bars: HTMLElement;
  neighborhood: HTMLElement;
  kSlider: HTMLInputElement;
  kReadout: HTMLElement;
  retrievalSelect: HTMLSelectElement;
  vizSelect: HTMLSelectElement;
}

function buildControls(root: HTMLElement): Dom {
  root.innerHTML = `
    <div class="layout">
      <aside id="alert-queue" class="panel"></aside>
      <main class="panels">
        <section id="confidence-panel" class="panel"></section>
        <section id="shap-panel" class="panel"></section>
        <section class="panel">
          <div class="controls">
            <label>neighbors k
              <input id="k-slider" type="range" min="${K_MIN}" max="${K_MAX}" step="1" />
              <span id="k-readout"></span>
            </label>
            <label>retrieval distance <select id="retrieval-select"></select></label>
            <label>view distance <select id="viz-select"></select></label>
          </div>
          <div id="neighborhood-panel"></div>
        </section>
      </main>
    </div>`;
  const byId = <T extends HTMLElement>(id: string) => root.querySelector<T>(`#${id}`)!;
  const dom: Dom = {
    queue: byId("alert-queue"),
    confidence: byId("confidence-panel"),
    bars: byId("shap-panel"),
    neighborhood: byId("neighborhood-panel"),
    kSlider: byId<HTMLInputElement>("k-slider"),
    kReadout: byId("k-readout"),
    retrievalSelect: byId<HTMLSelectElement>("retrieval-select"),
    vizSelect: byId<HTMLSelectElement>("viz-select"),
  };
  for (const select of [dom.retrievalSelect, dom.vizSelect]) {
    for (const code of DISTANCE_CODES) {
      const option = document.createElement("option");
      option.value = code;
      option.textContent = `${code} — ${DISTANCE_LABELS[code]}`;
      select.appendChild(option);
    }
  }
  return dom;
}

export class DashboardApp {
  readonly state = initialState();
  private api: ApiClient;
  private dom: Dom;
  private inflight: AbortController | null = null;
  private refetchSoon: { (): void; cancel(): void };

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.api = new ApiClient(options.apiBaseUrl ?? "");
    this.dom = buildControls(root);
    this.refetchSoon = debounce(() => void this.fetchNeighborhood(), options.sliderDebounceMs ?? 150);

    this.dom.kSlider.value = String(this.state.k);
    this.dom.kReadout.textContent = String(this.state.k);
    this.dom.retrievalSelect.value = this.state.retrievalKind;
    this.dom.vizSelect.value = this.state.vizKind;

    this.dom.kSlider.addEventListener("input", () => {
      this.state.k = clampK(Number(this.dom.kSlider.value));
      this.dom.kReadout.textContent = String(this.state.k);
      this.refetchSoon();
    });
    this.dom.retrievalSelect.addEventListener("change", () => {
      this.state.retrievalKind = this.dom.retrievalSelect.value as DistanceCode;
      void this.fetchNeighborhood();
    });
    this.dom.vizSelect.addEventListener("change", () => {
      this.state.vizKind = this.dom.vizSelect.value as DistanceCode;
      void this.fetchNeighborhood();
    });
  }

  async start(): Promise<void> {
    await this.loadQueue();
  }

  async loadQueue(): Promise<void> {
    let page: AlertPage | null = null;
    let error: string | null = null;
    try {
      page = await this.api.listAlerts();
    } catch (exc) {
      error = exc instanceof Error ? exc.message : String(exc);
    }
    renderAlertQueue(this.dom.queue, page, error, this.state.selectedAlertId, {
      onSelect: (alertId) => void this.selectAlert(alertId),
      onRetry: () => void this.loadQueue(),
    });
    if (page !== null && page.items.length > 0 && this.state.selectedAlertId === null) {
      await this.selectAlert(page.items[0].alert_id);
    }
  }

  async selectAlert(alertId: string): Promise<void> {
    this.state.selectedAlertId = alertId;
    for (const row of this.dom.queue.querySelectorAll<HTMLElement>(".alert-row")) {
      row.classList.toggle("selected", row.dataset.alertId === alertId);
    }
    try {
      const view = await this.api.alertView(alertId);
      renderConfidencePanel(this.dom.confidence, view);
      renderShapBars(this.dom.bars, view);
    } catch (exc) {
      this.dom.confidence.textContent = `Failed to load alert: ${exc instanceof Error ? exc.message : exc}`;
      this.dom.bars.innerHTML = "";
    }
    await this.fetchNeighborhood();
  }

  /** One in-flight neighborhood request at a time; the latest parameters win. */
  async fetchNeighborhood(): Promise<void> {
    const alertId = this.state.selectedAlertId;
    if (alertId === null) return;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const view: NeighborhoodView = await this.api.neighborhood(
        alertId,
        this.state.k,
        this.state.retrievalKind,
        this.state.vizKind,
        controller.signal,
      );
      if (controller.signal.aborted) return;
      renderNeighborhood(this.dom.neighborhood, view, {
        onHover: (pointId) => {
          this.state.hoveredPointId = pointId;
        },
      });
    } catch (exc) {
      if (controller.signal.aborted) return;
      this.dom.neighborhood.textContent = `Failed to load neighborhood: ${
        exc instanceof Error ? exc.message : exc
      }`;
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }
}

export function mountDashboard(root: HTMLElement, options: AppOptions = {}): DashboardApp {
  const app = new DashboardApp(root, options);
  void app.start();
  return app;
}
