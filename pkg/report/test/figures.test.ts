import { describe, expect, it } from "vitest";

import { parseConditionStats, parseTrajectory, parseWordFrequency } from "../src/csv.js";
import {
  conditionBars,
  progressionPanels,
  trajectoryLines,
  wordHistogram,
} from "../src/figures.js";

// four-condition fixture in the shape of the final-performance table
const STATS_CSV = [
  "condition,n,mean,std,ci95,pct_vs_control",
  "control,30,210.4,22.1,8.25,",
  "direct_precursor,30,198.7,51.9,19.38,-5.6",
  "scrambled,30,181.3,40.2,15.01,-13.8",
  "full_curriculum,29,155.2,40.7,15.48,-26.2",
].join("\n");

const FLAT_TRAJECTORY = [
  "condition,round,mean,std,ci95",
  ...[1, 2, 3].map((r) => `control,${r},10.0,0.0,0.00`),
].join("\n");

describe("conditionBars", () => {
  const rows = parseConditionStats(STATS_CSV, "condition_stats.csv");
  const figure = conditionBars(rows);

  it("sidecar carries exactly the CSV means and CIs", () => {
    const sidecar = figure.sidecar as { conditions: { mean: number; ci95: number }[] };
    expect(sidecar.conditions).toHaveLength(4);
    rows.forEach((row, i) => {
      expect(Math.abs(sidecar.conditions[i].mean - row.mean)).toBeLessThanOrEqual(1e-6);
      expect(Math.abs((sidecar.conditions[i].ci95 ?? 0) - (row.ci95 ?? 0))).toBeLessThanOrEqual(1e-6);
    });
  });

  it("draws one bar and one error bar per condition", () => {
    const bars = figure.svg.match(/<rect [^>]*fill="#(?!fff)/g) ?? [];
    expect(bars.length).toBeGreaterThanOrEqual(4);
    for (const row of rows) {
      expect(figure.svg).toContain(`>${row.condition}</text>`);
    }
  });
});

describe("trajectoryLines", () => {
  it("flat series plots a flat line with a zero-width band", () => {
    const rows = parseTrajectory(FLAT_TRAJECTORY, "trajectory.csv");
    const figure = trajectoryLines(rows, null);
    const sidecar = figure.sidecar as {
      series: { mean: number[]; ci95: (number | null)[] }[];
    };
    expect(sidecar.series[0].mean).toEqual([10, 10, 10]);
    expect(sidecar.series[0].ci95).toEqual([0, 0, 0]);
    const polyline = figure.svg.match(/<polyline points="([^"]+)" fill="none" stroke="#4c72b0" stroke-width="2.00"/);
    expect(polyline).not.toBeNull();
    const ys = polyline![1].split(" ").map((p) => p.split(",")[1]);
    expect(new Set(ys).size).toBe(1);
    // zero-width band: polygon upper edge equals lower edge
    const polygon = figure.svg.match(/<polygon points="([^"]+)"/);
    const points = polygon![1].split(" ");
    expect(points.slice(0, 3)).toEqual(points.slice(3).reverse());
  });

  it("includes spaghetti series when per-trial rows are given", () => {
    const rows = parseTrajectory(FLAT_TRAJECTORY, "trajectory.csv");
    const trials = [
      { condition: "control", trial: 0, round: 1, value: 8 },
      { condition: "control", trial: 0, round: 2, value: 12 },
      { condition: "control", trial: 0, round: 3, value: 10 },
    ];
    const figure = trajectoryLines(rows, trials);
    const sidecar = figure.sidecar as {
      trials: { condition: string; trials: { trial: number; values: number[] }[] }[] | null;
    };
    expect(sidecar.trials![0].trials[0].values).toEqual([8, 12, 10]);
    expect(figure.svg).toContain('opacity="0.35"');
  });
});

describe("progressionPanels", () => {
  it("first-vs-last deltas come from the trajectory rows", () => {
    const csv = [
      "condition,round,mean,std,ci95",
      "control,1,14.0,2.0,1.00",
      "control,2,11.0,3.0,1.20",
      "control,3,6.5,4.0,1.40",
    ].join("\n");
    const figure = progressionPanels(parseTrajectory(csv, "trajectory.csv"));
    const sidecar = figure.sidecar as {
      first_vs_last: { first: number; last: number; delta: number }[];
      consistency: { std: (number | null)[] }[];
    };
    expect(sidecar.first_vs_last[0]).toMatchObject({ first: 14, last: 6.5, delta: -7.5 });
    expect(sidecar.consistency[0].std).toEqual([2, 3, 4]);
  });
});

describe("wordHistogram", () => {
  it("sidecar is sorted by descending count", () => {
    const rows = parseWordFrequency("word,count\nhare,3\nstag,12\ntrust,3", "wf.csv");
    const figure = wordHistogram(rows);
    const sidecar = figure.sidecar as { words: { word: string; count: number }[] };
    expect(sidecar.words.map((w) => w.word)).toEqual(["stag", "hare", "trust"]);
  });
});
