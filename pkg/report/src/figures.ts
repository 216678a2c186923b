/**
 * Figure builders. Each returns the SVG text plus a machine-readable
 * sidecar carrying exactly the values plotted, copied verbatim from the
 * parsed CSV rows so fidelity can be checked downstream.
 */

import {
  ConditionStatsRow,
  TrajectoryRow,
  TrialTrajectoryRow,
  WordFrequencyRow,
} from "./csv.js";
import { axes, colorFor, el, fmt, linearScale, niceMax, svgDocument, text } from "./svg.js";

export interface Figure {
  name: string;
  svg: string;
  sidecar: Record<string, unknown>;
}

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { top: 40, right: 24, bottom: 64, left: 64 };

/** Fig-1 style: one bar per condition, error bars are the 95% CI. */
export function conditionBars(rows: ConditionStatsRow[]): Figure {
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = MARGIN.top;
  const y1 = HEIGHT - MARGIN.bottom;
  const yMax = niceMax(Math.max(...rows.map((r) => r.mean + (r.ci95 ?? 0))));
  const yScale = linearScale([0, yMax], [y1, y0]);
  const slot = (x1 - x0) / rows.length;
  const barWidth = slot * 0.6;
  const parts = axes(x0, y0, x1, y1, yMax, "mean payoff (tokens)");
  rows.forEach((row, i) => {
    const cx = x0 + slot * i + slot / 2;
    const top = yScale(row.mean);
    parts.push(
      el("rect", {
        x: cx - barWidth / 2,
        y: top,
        width: barWidth,
        height: y1 - top,
        fill: colorFor(i),
      }),
    );
    if (row.ci95 !== null) {
      const hi = yScale(row.mean + row.ci95);
      const lo = yScale(row.mean - row.ci95);
      parts.push(el("line", { x1: cx, y1: hi, x2: cx, y2: lo, stroke: "#222", "stroke-width": 1.5 }));
      for (const y of [hi, lo]) {
        parts.push(el("line", { x1: cx - 6, y1: y, x2: cx + 6, y2: y, stroke: "#222", "stroke-width": 1.5 }));
      }
    }
    parts.push(text(cx, y1 + 18, row.condition, { "text-anchor": "middle", "font-size": 11 }));
    parts.push(text(cx, top - 6, fmt(row.mean), { "text-anchor": "middle", "font-size": 10 }));
  });
  parts.push(text(WIDTH / 2, 20, "Final-stage payoff by condition (95% CI)", {
    "text-anchor": "middle",
    "font-size": 14,
  }));
  return {
    name: "condition_bars",
    svg: svgDocument(WIDTH, HEIGHT, parts),
    sidecar: {
      figure: "condition_bars",
      conditions: rows.map((row) => ({
        condition: row.condition,
        n: row.n,
        mean: row.mean,
        std: row.std,
        ci95: row.ci95,
        pct_vs_control: row.pct_vs_control,
      })),
    },
  };
}

function groupBy<T extends { condition: string }>(rows: T[]): Map<string, T[]> {
  const out = new Map<string, T[]>();
  for (const row of rows) {
    const bucket = out.get(row.condition) ?? [];
    bucket.push(row);
    out.set(row.condition, bucket);
  }
  return out;
}

/** Fig-3 style: mean lines with CI bands, plus per-trial spaghetti. */
export function trajectoryLines(
  rows: TrajectoryRow[],
  trials: TrialTrajectoryRow[] | null,
): Figure {
  const byCondition = groupBy(rows);
  const conditions = [...byCondition.keys()].sort();
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = MARGIN.top;
  const y1 = HEIGHT - MARGIN.bottom;
  const maxRound = Math.max(...rows.map((r) => r.round));
  const yMax = niceMax(
    Math.max(
      ...rows.map((r) => r.mean + (r.ci95 ?? 0)),
      ...(trials ?? []).map((r) => r.value),
    ),
  );
  const xScale = linearScale([1, Math.max(maxRound, 2)], [x0, x1]);
  const yScale = linearScale([0, yMax], [y1, y0]);
  const parts = axes(x0, y0, x1, y1, yMax, "mean contribution");
  for (let round = 1; round <= maxRound; round++) {
    parts.push(text(xScale(round), y1 + 16, String(round), { "text-anchor": "middle", "font-size": 10 }));
  }
  parts.push(text((x0 + x1) / 2, y1 + 34, "round", { "text-anchor": "middle", "font-size": 12 }));

  const trialsByCondition = trials ? groupBy(trials) : null;
  conditions.forEach((condition, i) => {
    const series = [...(byCondition.get(condition) ?? [])].sort((a, b) => a.round - b.round);
    const color = colorFor(i);
    if (trialsByCondition) {
      const byTrial = new Map<number, TrialTrajectoryRow[]>();
      for (const row of trialsByCondition.get(condition) ?? []) {
        const bucket = byTrial.get(row.trial) ?? [];
        bucket.push(row);
        byTrial.set(row.trial, bucket);
      }
      for (const trialRows of byTrial.values()) {
        const points = trialRows
          .sort((a, b) => a.round - b.round)
          .map((r) => `${fmt(xScale(r.round))},${fmt(yScale(r.value))}`)
          .join(" ");
        parts.push(
          el("polyline", { points, fill: "none", stroke: color, "stroke-width": 0.6, opacity: 0.35 }),
        );
      }
    }
    if (series.every((r) => r.ci95 !== null)) {
      const upper = series.map((r) => `${fmt(xScale(r.round))},${fmt(yScale(r.mean + (r.ci95 ?? 0)))}`);
      const lower = [...series]
        .reverse()
        .map((r) => `${fmt(xScale(r.round))},${fmt(yScale(r.mean - (r.ci95 ?? 0)))}`);
      parts.push(
        el("polygon", {
          points: [...upper, ...lower].join(" "),
          fill: color,
          opacity: 0.18,
          stroke: "none",
        }),
      );
    }
    const line = series.map((r) => `${fmt(xScale(r.round))},${fmt(yScale(r.mean))}`).join(" ");
    parts.push(el("polyline", { points: line, fill: "none", stroke: color, "stroke-width": 2 }));
    parts.push(text(x1 - 4, y0 + 14 + i * 14, condition, {
      "text-anchor": "end",
      "font-size": 11,
      fill: color,
    }));
  });
  parts.push(text(WIDTH / 2, 20, "Contribution trajectories (95% CI bands)", {
    "text-anchor": "middle",
    "font-size": 14,
  }));
  return {
    name: "trajectory",
    svg: svgDocument(WIDTH, HEIGHT, parts),
    sidecar: {
      figure: "trajectory",
      series: conditions.map((condition) => {
        const series = [...(byCondition.get(condition) ?? [])].sort((a, b) => a.round - b.round);
        return {
          condition,
          rounds: series.map((r) => r.round),
          mean: series.map((r) => r.mean),
          std: series.map((r) => r.std),
          ci95: series.map((r) => r.ci95),
        };
      }),
      trials: trialsByCondition
        ? conditions.map((condition) => ({
            condition,
            trials: [...new Set((trialsByCondition.get(condition) ?? []).map((r) => r.trial))]
              .sort((a, b) => a - b)
              .map((trial) => ({
                trial,
                values: (trialsByCondition.get(condition) ?? [])
                  .filter((r) => r.trial === trial)
                  .sort((a, b) => a.round - b.round)
                  .map((r) => r.value),
              })),
          }))
        : null,
    },
  };
}

/** Fig-4 style: first-vs-last-round bars and per-round std lines. */
export function progressionPanels(rows: TrajectoryRow[]): Figure {
  const byCondition = groupBy(rows);
  const conditions = [...byCondition.keys()].sort();
  const panelWidth = (WIDTH - MARGIN.left * 2 - MARGIN.right) / 2;
  const y0 = MARGIN.top;
  const y1 = HEIGHT - MARGIN.bottom;

  const firstLast = conditions.map((condition) => {
    const series = [...(byCondition.get(condition) ?? [])].sort((a, b) => a.round - b.round);
    return {
      condition,
      first: series[0].mean,
      last: series[series.length - 1].mean,
    };
  });
  const leftMax = niceMax(Math.max(...firstLast.flatMap((r) => [r.first, r.last])));
  const leftX0 = MARGIN.left;
  const leftX1 = leftX0 + panelWidth;
  const leftScale = linearScale([0, leftMax], [y1, y0]);
  const parts = axes(leftX0, y0, leftX1, y1, leftMax, "mean contribution");
  const slot = (leftX1 - leftX0) / firstLast.length;
  firstLast.forEach((row, i) => {
    const cx = leftX0 + slot * i + slot / 2;
    const w = slot * 0.3;
    const firstTop = leftScale(row.first);
    const lastTop = leftScale(row.last);
    parts.push(el("rect", { x: cx - w, y: firstTop, width: w, height: y1 - firstTop, fill: colorFor(i) }));
    parts.push(el("rect", {
      x: cx, y: lastTop, width: w, height: y1 - lastTop, fill: colorFor(i), opacity: 0.45,
    }));
    parts.push(text(cx, y1 + 18, row.condition, { "text-anchor": "middle", "font-size": 9 }));
  });
  parts.push(text(leftX0 + panelWidth / 2, 20, "First (solid) vs last (faded) round", {
    "text-anchor": "middle",
    "font-size": 13,
  }));

  const consistency = conditions.map((condition) => {
    const series = [...(byCondition.get(condition) ?? [])].sort((a, b) => a.round - b.round);
    return { condition, rounds: series.map((r) => r.round), std: series.map((r) => r.std) };
  });
  const stdValues = consistency.flatMap((c) => c.std.filter((v): v is number => v !== null));
  const rightMax = niceMax(stdValues.length ? Math.max(...stdValues) : 1);
  const rightX0 = MARGIN.left + panelWidth + MARGIN.left;
  const rightX1 = rightX0 + panelWidth;
  const maxRound = Math.max(...rows.map((r) => r.round));
  const xScale = linearScale([1, Math.max(maxRound, 2)], [rightX0, rightX1]);
  const rightScale = linearScale([0, rightMax], [y1, y0]);
  parts.push(...axes(rightX0, y0, rightX1, y1, rightMax, "std of contributions"));
  consistency.forEach((c, i) => {
    const points = c.rounds
      .map((round, k) => (c.std[k] === null ? null : `${fmt(xScale(round))},${fmt(rightScale(c.std[k] as number))}`))
      .filter((p): p is string => p !== null)
      .join(" ");
    parts.push(el("polyline", { points, fill: "none", stroke: colorFor(i), "stroke-width": 2 }));
  });
  parts.push(text(rightX0 + panelWidth / 2, 20, "Behavioral consistency over rounds", {
    "text-anchor": "middle",
    "font-size": 13,
  }));

  return {
    name: "progression",
    svg: svgDocument(WIDTH, HEIGHT, parts),
    sidecar: {
      figure: "progression",
      first_vs_last: firstLast.map((row) => ({
        condition: row.condition,
        first: row.first,
        last: row.last,
        delta: Number((row.last - row.first).toFixed(10)),
      })),
      consistency,
    },
  };
}

/** Appendix-E style: descending word histogram. */
export function wordHistogram(rows: WordFrequencyRow[]): Figure {
  const sorted = [...rows].sort((a, b) => b.count - a.count || a.word.localeCompare(b.word));
  const top = sorted.slice(0, 20);
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = MARGIN.top;
  const y1 = HEIGHT - MARGIN.bottom;
  const yMax = niceMax(Math.max(...top.map((r) => r.count)));
  const yScale = linearScale([0, yMax], [y1, y0]);
  const slot = (x1 - x0) / top.length;
  const parts = axes(x0, y0, x1, y1, yMax, "count");
  top.forEach((row, i) => {
    const cx = x0 + slot * i + slot / 2;
    const topY = yScale(row.count);
    parts.push(el("rect", {
      x: cx - slot * 0.35, y: topY, width: slot * 0.7, height: y1 - topY, fill: colorFor(0),
    }));
    parts.push(text(cx, y1 + 12, row.word, {
      "text-anchor": "end",
      "font-size": 9,
      transform: `rotate(-45 ${fmt(cx)} ${fmt(y1 + 12)})`,
    }));
  });
  parts.push(text(WIDTH / 2, 20, "Broadcast word frequency", {
    "text-anchor": "middle",
    "font-size": 14,
  }));
  return {
    name: "word_frequency",
    svg: svgDocument(WIDTH, HEIGHT, parts),
    sidecar: {
      figure: "word_frequency",
      words: sorted.map((row) => ({ word: row.word, count: row.count })),
    },
  };
}
