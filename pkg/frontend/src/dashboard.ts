// Instructor dashboard view model. Bars are derived fresh from the most
// recently fetched report each time (no client-side accumulation), and bar
// order equals the report's entry order.

import type { FrequencyEntry, FrequencyReport } from "./api.js";

export const MIN_TOP_N = 3;
export const MAX_TOP_N = 10;
export const DEFAULT_TOP_N = 5;
export const DEFAULT_REFRESH_SECONDS = 30;

export interface BarDatum {
  kcId: string;
  count: number;
  widthPct: number;
  samples: string[];
}

export interface DashboardViewState {
  report: FrequencyReport | null;
  topN: number;
  selectedKc: string | null;
  refreshSeconds: number;
  lastError: string | null;
}

export function initialDashboardState(): DashboardViewState {
  return {
    report: null,
    topN: DEFAULT_TOP_N,
    selectedKc: null,
    refreshSeconds: DEFAULT_REFRESH_SECONDS,
    lastError: null,
  };
}

export function clampTopN(n: number): number {
  if (Number.isNaN(n)) return DEFAULT_TOP_N;
  return Math.min(MAX_TOP_N, Math.max(MIN_TOP_N, Math.round(n)));
}

export function setTopN(state: DashboardViewState, n: number): DashboardViewState {
  return { ...state, topN: clampTopN(n) };
}

export function applyReport(state: DashboardViewState, report: FrequencyReport): DashboardViewState {
  const stillListed =
    state.selectedKc !== null &&
    report.entries.some((entry) => entry.kc_id === state.selectedKc);
  return {
    ...state,
    report,
    lastError: null,
    selectedKc: stillListed ? state.selectedKc : null,
  };
}

export function applyError(state: DashboardViewState, message: string): DashboardViewState {
  return { ...state, lastError: message };
}

export function toggleKc(state: DashboardViewState, kcId: string): DashboardViewState {
  return { ...state, selectedKc: state.selectedKc === kcId ? null : kcId };
}

// Bars preserve report order; widths are relative to the largest count so
// the top entry always spans the full track.
export function barsFromReport(report: FrequencyReport | null, topN: number): BarDatum[] {
  if (!report || report.entries.length === 0) {
    return [];
  }
  const entries = report.entries.slice(0, topN);
  const maxCount = Math.max(...entries.map((entry) => entry.count));
  return entries.map((entry) => ({
    kcId: entry.kc_id,
    count: entry.count,
    widthPct: maxCount > 0 ? (entry.count / maxCount) * 100 : 0,
    samples: entry.sample_misconceptions,
  }));
}

export function selectedEntry(state: DashboardViewState): FrequencyEntry | null {
  if (!state.report || state.selectedKc === null) {
    return null;
  }
  return state.report.entries.find((entry) => entry.kc_id === state.selectedKc) ?? null;
}
