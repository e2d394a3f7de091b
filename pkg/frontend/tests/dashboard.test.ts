import { describe, expect, it } from "vitest";

import benchmarkReport from "./fixtures/benchmark_report.json";
import type { FrequencyReport } from "../src/api.js";
import {
  applyReport,
  barsFromReport,
  clampTopN,
  initialDashboardState,
  selectedEntry,
  setTopN,
  toggleKc,
} from "../src/dashboard.js";

const report = benchmarkReport as FrequencyReport;
const PLANTED = ["KC1.2.1", "KC1.3.1", "KC1.6.1", "KC2.4.1"];

describe("bars from the benchmark fixture report", () => {
  it("top-4 bars are the planted KCs, in report order", () => {
    const bars = barsFromReport(report, 10);
    expect(bars.slice(0, 4).map((b) => b.kcId)).toEqual(PLANTED);
    expect(bars.map((b) => b.kcId)).toEqual(report.entries.map((e) => e.kc_id));
    expect(bars.map((b) => b.count)).toEqual(report.entries.map((e) => e.count));
  });

  it("widths are relative to the maximum count", () => {
    const bars = barsFromReport(report, 10);
    expect(bars[0].widthPct).toBe(100);
    const noise = bars.find((b) => b.kcId === "KC3.1.1");
    expect(noise?.widthPct).toBeCloseTo((2 / 5) * 100, 6);
  });

  it("the n selector limits the bar count exactly", () => {
    expect(barsFromReport(report, 3)).toHaveLength(3);
    expect(barsFromReport(report, 10).length).toBeLessThanOrEqual(10);
  });

  it("empty course renders no bars", () => {
    const empty: FrequencyReport = {
      course_id: "ai-101",
      registry_version: "v",
      window: { start: null, end: null },
      entries: [],
      sessions_counted: 0,
    };
    expect(barsFromReport(empty, 5)).toEqual([]);
    expect(barsFromReport(null, 5)).toEqual([]);
  });
});

describe("dashboard state", () => {
  it("clamps the top-n selector to 3..10", () => {
    expect(clampTopN(1)).toBe(3);
    expect(clampTopN(7)).toBe(7);
    expect(clampTopN(99)).toBe(10);
    expect(setTopN(initialDashboardState(), 4).topN).toBe(4);
  });

  it("chart values always equal the most recently fetched report", () => {
    let state = applyReport(initialDashboardState(), report);
    const smaller: FrequencyReport = {
      ...report,
      entries: report.entries.slice(0, 2),
      sessions_counted: 2,
    };
    state = applyReport(state, smaller);
    // No accumulation: bars derive from the latest report alone.
    expect(barsFromReport(state.report, 10)).toHaveLength(2);
  });

  it("drill-down toggles and exposes misconception samples", () => {
    let state = applyReport(initialDashboardState(), report);
    state = toggleKc(state, "KC1.2.1");
    const entry = selectedEntry(state);
    expect(entry?.kc_id).toBe("KC1.2.1");
    expect(entry?.sample_misconceptions.length).toBeGreaterThan(0);
    expect(entry?.sample_misconceptions.length).toBeLessThanOrEqual(3);
    state = toggleKc(state, "KC1.2.1");
    expect(selectedEntry(state)).toBeNull();
  });

  it("selection is cleared when the KC drops out of the report", () => {
    let state = applyReport(initialDashboardState(), report);
    state = toggleKc(state, "KC3.2.1");
    const without: FrequencyReport = {
      ...report,
      entries: report.entries.filter((e) => e.kc_id !== "KC3.2.1"),
    };
    state = applyReport(state, without);
    expect(state.selectedKc).toBeNull();
  });
});
