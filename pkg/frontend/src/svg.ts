/** Tiny SVG assembly helpers; no rendering dependencies. */

export const WIDTH = 640;
export const HEIGHT = 440;
export const MARGIN = { top: 30, right: 20, bottom: 55, left: 65 };

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 0.5;
    d1 += 0.5;
  }
  const f = ((v: number) =>
    range[0] + ((v - d0) / (d1 - d0)) * (range[1] - range[0])) as Scale;
  f.domain = [d0, d1];
  return f;
}

export function ticks(scale: Scale, count = 5): number[] {
  const [d0, d1] = scale.domain;
  const span = d1 - d0;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const out: number[] = [];
  for (let v = Math.ceil(d0 / s) * s; v <= d1 + 1e-12; v += s) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function svgDocument(body: string, title: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<text x="${WIDTH / 2}" y="18" text-anchor="middle" font-size="14">${esc(title)}</text>`,
    body,
    `</svg>`,
  ].join("\n");
}

export function axes(
  x: Scale,
  y: Scale,
  xLabel: string,
  yLabel: string,
  xTickValues?: number[],
): string {
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  const parts: string[] = [
    `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`,
    `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`,
  ];
  for (const t of xTickValues ?? ticks(x)) {
    const px = x(t);
    parts.push(
      `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`,
      `<text x="${px}" y="${y0 + 20}" text-anchor="middle">${t}</text>`,
    );
  }
  for (const t of ticks(y)) {
    const py = y(t);
    parts.push(
      `<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`,
      `<text x="${x0 - 8}" y="${py + 4}" text-anchor="end">${t}</text>`,
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" text-anchor="middle">${esc(xLabel)}</text>`,
    `<text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" transform="rotate(-90 18 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`,
  );
  return parts.join("\n");
}

export function legend(names: string[]): string {
  return names
    .map((name, i) => {
      const y = MARGIN.top + 14 + i * 16;
      const x = WIDTH - MARGIN.right - 130;
      return (
        `<rect x="${x}" y="${y - 9}" width="10" height="10" fill="${PALETTE[i % PALETTE.length]}"/>` +
        `<text x="${x + 15}" y="${y}">${esc(name)}</text>`
      );
    })
    .join("\n");
}
