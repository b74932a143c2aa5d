import type { DistanceCode } from "./api.js";

export const K_MIN = 1;
export const K_MAX = 500;

export const DISTANCE_CODES: DistanceCode[] = ["F", "S", "G", "L"];

export const DISTANCE_LABELS: Record<DistanceCode, string> = {
  F: "feature values",
  S: "contribution values",
  G: "globally weighted features",
  L: "locally weighted features",
};

export interface UiState {
  selectedAlertId: string | null;
  k: number;
  retrievalKind: DistanceCode;
  vizKind: DistanceCode;
  hoveredPointId: string | null;
}

export function initialState(): UiState {
  return {
    selectedAlertId: null,
    k: 10,
    retrievalKind: "S",
    vizKind: "S",
    hoveredPointId: null,
  };
}

export function clampK(value: number): number {
  if (!Number.isFinite(value)) return K_MIN;
  return Math.min(K_MAX, Math.max(K_MIN, Math.round(value)));
}

export function isDistanceCode(value: string): value is DistanceCode {
  return (DISTANCE_CODES as string[]).includes(value);
}
