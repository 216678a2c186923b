/**
 * Read the analysis CSVs from one directory and write every figure that
 * its inputs support: SVG + PNG + JSON sidecar per figure.
 */

import { promises as fs } from "fs";
import path from "path";
import sharp from "sharp";

import {
  parseConditionStats,
  parseTrajectory,
  parseTrialTrajectory,
  parseWordFrequency,
} from "./csv.js";
import {
  Figure,
  conditionBars,
  progressionPanels,
  trajectoryLines,
  wordHistogram,
} from "./figures.js";

export const INPUT_FILES = {
  conditionStats: "condition_stats.csv",
  trajectory: "trajectory.csv",
  trajectoryTrials: "trajectory_trials.csv",
  wordFrequency: "word_frequency.csv",
};

async function readIfPresent(dir: string, name: string): Promise<string | null> {
  try {
    return await fs.readFile(path.join(dir, name), "utf-8");
  } catch (err) {
    if ((err as NodeJS.ErrnoException).code === "ENOENT") return null;
    throw err;
  }
}

async function writeFigure(outDir: string, figure: Figure, png: boolean): Promise<string[]> {
  const written: string[] = [];
  const svgPath = path.join(outDir, `${figure.name}.svg`);
  await fs.writeFile(svgPath, figure.svg, "utf-8");
  written.push(svgPath);
  const sidecarPath = path.join(outDir, `${figure.name}.json`);
  await fs.writeFile(sidecarPath, JSON.stringify(figure.sidecar, null, 2) + "\n", "utf-8");
  written.push(sidecarPath);
  if (png) {
    const pngPath = path.join(outDir, `${figure.name}.png`);
    await sharp(Buffer.from(figure.svg), { density: 144 }).png().toFile(pngPath);
    written.push(pngPath);
  }
  return written;
}

export interface RenderOptions {
  png?: boolean; // rasterize via sharp (on by default)
}

export async function renderAll(
  inputDir: string,
  outDir: string,
  options: RenderOptions = {},
): Promise<string[]> {
  const png = options.png ?? true;
  const statsText = await readIfPresent(inputDir, INPUT_FILES.conditionStats);
  const trajectoryText = await readIfPresent(inputDir, INPUT_FILES.trajectory);
  if (statsText === null && trajectoryText === null) {
    throw new Error(
      `${inputDir}: neither ${INPUT_FILES.conditionStats} nor ${INPUT_FILES.trajectory} found`,
    );
  }
  await fs.mkdir(outDir, { recursive: true });
  const written: string[] = [];

  if (statsText !== null) {
    const rows = parseConditionStats(statsText, INPUT_FILES.conditionStats);
    written.push(...(await writeFigure(outDir, conditionBars(rows), png)));
  }
  if (trajectoryText !== null) {
    const rows = parseTrajectory(trajectoryText, INPUT_FILES.trajectory);
    const trialsText = await readIfPresent(inputDir, INPUT_FILES.trajectoryTrials);
    const trials = trialsText === null
      ? null
      : parseTrialTrajectory(trialsText, INPUT_FILES.trajectoryTrials);
    written.push(...(await writeFigure(outDir, trajectoryLines(rows, trials), png)));
    written.push(...(await writeFigure(outDir, progressionPanels(rows), png)));
  }
  const wordsText = await readIfPresent(inputDir, INPUT_FILES.wordFrequency);
  if (wordsText !== null) {
    const rows = parseWordFrequency(wordsText, INPUT_FILES.wordFrequency);
    written.push(...(await writeFigure(outDir, wordHistogram(rows), png)));
  }
  return written;
}
