import { PolicyCurve } from "./aggregate";

const WIDTH = 860;
const HEIGHT = 520;
const MARGIN = { top: 30, right: 160, bottom: 55, left: 75 };

const COLORS = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#17becf",
];

/** Points drawn per curve; the data sidecar keeps full resolution. */
const MAX_DRAW_POINTS = 800;

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 1e4 || abs < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(3)));
}

function decimate(indices: number[]): number[] {
  if (indices.length <= MAX_DRAW_POINTS) return indices;
  const step = (indices.length - 1) / (MAX_DRAW_POINTS - 1);
  const out: number[] = [];
  for (let i = 0; i < MAX_DRAW_POINTS; i++) {
    out.push(indices[Math.round(i * step)]);
  }
  return out;
}

/**
 * Render loss gap (log scale) versus simulated time (linear scale) with a
 * median line and interquartile band per policy.
 */
export function renderFigure(
  curves: PolicyCurve[],
  checkpoints: number[] = []
): string {
  if (curves.length === 0) {
    throw new Error("nothing to plot");
  }
  const xMax = Math.max(...curves.map((c) => c.timesS[c.timesS.length - 1]));
  const positives = curves.flatMap((c) =>
    [...c.median, ...c.q1, ...c.q3].filter((v) => v > 0)
  );
  if (positives.length === 0) {
    throw new Error("all loss gaps are zero; nothing to plot on a log scale");
  }
  const yMin = Math.min(...positives);
  const yMax = Math.max(...positives);

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const x = (t: number) => MARGIN.left + (t / xMax) * plotW;
  const logMin = Math.floor(Math.log10(yMin));
  const logMax = Math.ceil(Math.log10(yMax));
  const y = (g: number) =>
    MARGIN.top +
    plotH -
    ((Math.log10(Math.max(g, yMin)) - logMin) / (logMax - logMin)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="13">`
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);

  // Axes and grid lines.
  for (let e = logMin; e <= logMax; e++) {
    const yy = y(10 ** e);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${yy}" x2="${MARGIN.left + plotW}" y2="${yy}" ` +
        `stroke="#ddd"/>`,
      `<text x="${MARGIN.left - 8}" y="${yy + 4}" text-anchor="end">1e${e}</text>`
    );
  }
  const nXTicks = 6;
  for (let i = 0; i <= nXTicks; i++) {
    const t = (xMax * i) / nXTicks;
    parts.push(
      `<line x1="${x(t)}" y1="${MARGIN.top + plotH}" x2="${x(t)}" ` +
        `y2="${MARGIN.top + plotH + 5}" stroke="#333"/>`,
      `<text x="${x(t)}" y="${MARGIN.top + plotH + 20}" text-anchor="middle">` +
        `${fmtTick(t)}</text>`
    );
  }
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" ` +
      `x2="${MARGIN.left + plotW}" y2="${MARGIN.top + plotH}" stroke="#333"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
      `y2="${MARGIN.top + plotH}" stroke="#333"/>`,
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 12}" text-anchor="middle">` +
      `simulated time (s)</text>`,
    `<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">loss gap</text>`
  );

  for (const t of checkpoints) {
    parts.push(
      `<line x1="${x(t)}" y1="${MARGIN.top}" x2="${x(t)}" ` +
        `y2="${MARGIN.top + plotH}" stroke="#999" stroke-dasharray="4 3"/>`,
      `<text x="${x(t) + 4}" y="${MARGIN.top + 14}" fill="#666">t=${fmtTick(t)}</text>`
    );
  }

  curves.forEach((curve, ci) => {
    const color = COLORS[ci % COLORS.length];
    const idx = decimate(curve.timesS.map((_, i) => i));
    const band =
      idx.map((i) => `${x(curve.timesS[i])},${y(curve.q3[i])}`).join(" ") +
      " " +
      idx
        .slice()
        .reverse()
        .map((i) => `${x(curve.timesS[i])},${y(curve.q1[i])}`)
        .join(" ");
    parts.push(`<polygon points="${band}" fill="${color}" opacity="0.15"/>`);
    const line = idx
      .map((i) => `${x(curve.timesS[i])},${y(curve.median[i])}`)
      .join(" ");
    parts.push(
      `<polyline points="${line}" fill="none" stroke="${color}" stroke-width="1.8"/>`
    );
    const ly = MARGIN.top + 10 + ci * 22;
    parts.push(
      `<line x1="${WIDTH - MARGIN.right + 12}" y1="${ly}" ` +
        `x2="${WIDTH - MARGIN.right + 40}" y2="${ly}" stroke="${color}" stroke-width="2"/>`,
      `<text x="${WIDTH - MARGIN.right + 46}" y="${ly + 4}">` +
        `${curve.policy} (${curve.seeds.length} seeds)</text>`
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
