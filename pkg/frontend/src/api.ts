/** Typed client for the /v1 JSON API. The dashboard renders these values
 * verbatim; it never recomputes distances, confidences, or coordinates. */

export type DistanceCode = "F" | "S" | "G" | "L";

export interface AlertSummary {
  alert_id: string;
  model_confidence: number;
  timestamp: number | null;
}

export interface AlertPage {
  items: AlertSummary[];
  page: number;
  page_size: number;
  total: number;
}

export interface ShapBar {
  feature_name: string;
  phi: number;
  feature_value: number;
}

export interface AlertView {
  alert_id: string;
  model_confidence: number;
  base_value: number;
  shap_bars: ShapBar[]; // sorted by |phi| descending by the backend
}

export interface NeighborhoodPoint {
  id: string;
  x: number;
  y: number;
  true_label: number | null; // null only for the query point
  label_verified: boolean | null;
  retrieval_distance: number | null;
  viz_distance_to_query: number;
  is_query: boolean;
}

export interface NeighborhoodView {
  alert_id: string;
  k: number;
  retrieval_kind: DistanceCode;
  viz_kind: DistanceCode;
  stress: number;
  points: NeighborhoodPoint[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string, signal?: AbortSignal): Promise<T> {
  const response = await fetch(url, { signal });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  listAlerts(signal?: AbortSignal): Promise<AlertPage> {
    return getJson<AlertPage>(`${this.baseUrl}/v1/alerts`, signal);
  }

  alertView(alertId: string, signal?: AbortSignal): Promise<AlertView> {
    return getJson<AlertView>(`${this.baseUrl}/v1/alerts/${encodeURIComponent(alertId)}`, signal);
  }

  neighborhood(
    alertId: string,
    k: number,
    retrieval: DistanceCode,
    viz: DistanceCode,
    signal?: AbortSignal,
  ): Promise<NeighborhoodView> {
    const params = new URLSearchParams({ k: String(k), retrieval, viz });
    return getJson<NeighborhoodView>(
      `${this.baseUrl}/v1/alerts/${encodeURIComponent(alertId)}/neighborhood?${params}`,
      signal,
    );
  }
}
