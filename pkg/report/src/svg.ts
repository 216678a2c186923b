/**
 * Tiny deterministic SVG builder: string concatenation only, fixed number
 * formatting, no DOM. Identical inputs produce identical bytes.
 */

export type Attrs = Record<string, string | number>;

const XML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
};

export function escapeXml(text: string): string {
  return text.replace(/[&<>"]/g, (c) => XML_ESCAPES[c]);
}

export function fmt(value: number): string {
  const rounded = value.toFixed(2);
  return rounded === "-0.00" ? "0.00" : rounded;
}

function attrText(attrs: Attrs): string {
  return Object.entries(attrs)
    .map(([key, value]) => ` ${key}="${typeof value === "number" ? fmt(value) : escapeXml(value)}"`)
    .join("");
}

export function el(tag: string, attrs: Attrs, children: string[] = []): string {
  if (children.length === 0) {
    return `<${tag}${attrText(attrs)}/>`;
  }
  return `<${tag}${attrText(attrs)}>${children.join("")}</${tag}>`;
}

export function text(x: number, y: number, content: string, attrs: Attrs = {}): string {
  return `<text${attrText({ x: fmt(x), y: fmt(y), "font-family": "sans-serif", ...attrs })}>${escapeXml(content)}</text>`;
}

export function svgDocument(width: number, height: number, children: string[]): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">` +
    `<rect x="0" y="0" width="${width}" height="${height}" fill="white"/>` +
    children.join("") +
    `</svg>`
  );
}

/** Linear scale from a data domain onto pixel range. */
export interface Scale {
  (value: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  return scale;
}

/** Round the max up to a tidy tick boundary so axes look sane. */
export function niceMax(value: number): number {
  if (value <= 0) return 1;
  const magnitude = Math.pow(10, Math.floor(Math.log10(value)));
  for (const step of [1, 2, 2.5, 5, 10]) {
    if (value <= step * magnitude) return step * magnitude;
  }
  return 10 * magnitude;
}

export function ticks(max: number, count = 5): number[] {
  const out: number[] = [];
  for (let i = 0; i <= count; i++) {
    out.push((max / count) * i);
  }
  return out;
}

export const PALETTE = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

export function colorFor(index: number): string {
  return PALETTE[index % PALETTE.length];
}

/** Left/bottom axes with tick labels; y grows downward in SVG. */
export function axes(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  yMax: number,
  yLabel: string,
): string[] {
  const parts: string[] = [];
  const yScale = linearScale([0, yMax], [y1, y0]);
  parts.push(el("line", { x1: x0, y1: y0, x2: x0, y2: y1, stroke: "#333", "stroke-width": 1 }));
  parts.push(el("line", { x1: x0, y1: y1, x2: x1, y2: y1, stroke: "#333", "stroke-width": 1 }));
  for (const tick of ticks(yMax)) {
    const y = yScale(tick);
    parts.push(el("line", { x1: x0 - 4, y1: y, x2: x0, y2: y, stroke: "#333", "stroke-width": 1 }));
    parts.push(
      text(x0 - 8, y + 4, String(Number(tick.toFixed(2))), {
        "text-anchor": "end",
        "font-size": 11,
      }),
    );
  }
  parts.push(
    text(14, (y0 + y1) / 2, yLabel, {
      "text-anchor": "middle",
      "font-size": 12,
      transform: `rotate(-90 14 ${fmt((y0 + y1) / 2)})`,
    }),
  );
  return parts;
}
