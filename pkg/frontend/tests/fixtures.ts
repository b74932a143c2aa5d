import type { AlertPage, AlertView, NeighborhoodPoint, NeighborhoodView } from "../src/api.js";

export function alertPageFixture(n = 3): AlertPage {
  const items = Array.from({ length: n }, (_, i) => ({
    alert_id: `a${i}`,
    model_confidence: 0.9 - i * 0.1,
    timestamp: null,
  }));
  return { items, page: 0, page_size: 50, total: n };
}

export function alertViewFixture(m = 5): AlertView {
  // bars arrive sorted by |phi| descending, alternating sign
  const bars = Array.from({ length: m }, (_, j) => ({
    feature_name: `f${j}`,
    phi: (m - j) * 0.01 * (j % 2 === 0 ? 1 : -1),
    feature_value: j * 1.5,
  }));
  return { alert_id: "a0", model_confidence: 0.87, base_value: 0.5, shap_bars: bars };
}

export function neighborhoodFixture(k = 5, coincident = false): NeighborhoodView {
  const points: NeighborhoodPoint[] = [
    {
      id: "a0",
      x: 0,
      y: 0,
      true_label: null,
      label_verified: null,
      retrieval_distance: null,
      viz_distance_to_query: 0,
      is_query: true,
    },
  ];
  for (let i = 0; i < k; i++) {
    points.push({
      id: `c${i}`,
      x: coincident ? 0 : Math.cos(i),
      y: coincident ? 0 : Math.sin(i),
      true_label: i % 2,
      label_verified: i !== 2, // one unverified case
      retrieval_distance: 0.1 * (i + 1),
      viz_distance_to_query: 0.2 * (i + 1),
      is_query: false,
    });
  }
  return { alert_id: "a0", k, retrieval_kind: "S", viz_kind: "F", stress: 0.0421, points };
}

export interface FetchStub {
  calls: string[];
  restore(): void;
}

/** Replace global fetch with a router over the three API endpoints. */
export function stubFetch(overrides: {
  alerts?: AlertPage | number;
  alertView?: AlertView | number;
  neighborhood?: ((url: URL) => NeighborhoodView) | number;
} = {}): FetchStub {
  const calls: string[] = [];
  const original = globalThis.fetch;

  const respond = (body: unknown, status = 200) =>
    new Response(JSON.stringify(body), { status, headers: { "content-type": "application/json" } });

  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = new URL(String(input), "http://test.local");
    calls.push(url.pathname + url.search);
    if (init?.signal?.aborted) throw new DOMException("aborted", "AbortError");
    if (/\/v1\/alerts\/[^/]+\/neighborhood/.test(url.pathname)) {
      const spec = overrides.neighborhood;
      if (typeof spec === "number") return respond({ detail: "boom" }, spec);
      const k = Number(url.searchParams.get("k") ?? "10");
      return respond(spec ? spec(url) : neighborhoodFixture(k));
    }
    if (/\/v1\/alerts\/[^/]+$/.test(url.pathname)) {
      const spec = overrides.alertView;
      if (typeof spec === "number") return respond({ detail: "boom" }, spec);
      return respond(spec ?? alertViewFixture());
    }
    if (url.pathname === "/v1/alerts") {
      const spec = overrides.alerts;
      if (typeof spec === "number") return respond({ detail: "no session loaded" }, spec);
      return respond(spec ?? alertPageFixture());
    }
    return respond({ detail: "not found" }, 404);
  }) as typeof fetch;

  return {
    calls,
    restore() {
      globalThis.fetch = original;
    },
  };
}
