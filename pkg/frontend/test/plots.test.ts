import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { parseCsv, SchemaError, EmptyDataError } from "../src/csv.js";
import { plotHeatmap, plotSweep, plotTraining, plotViolin } from "../src/plots.js";

const FIXTURES = join(__dirname, "fixtures");
const read = (name: string) => readFileSync(join(FIXTURES, name), "utf8");

describe("parseCsv", () => {
  it("reads kind, columns and rows", () => {
    const t = parseCsv(read("sweep.csv"), "sweep");
    expect(t.kind).toBe("sweep");
    expect(t.columns).toContain("mean_R");
    expect(t.rows.length).toBeGreaterThan(0);
  });

  it("rejects a missing schema line", () => {
    expect(() => parseCsv("a,b\n1,2\n")).toThrow(SchemaError);
  });

  it("rejects an unsupported schema version", () => {
    const text = "# aircomp-csv-schema 99 kind=sweep\na\n1\n";
    expect(() => parseCsv(text)).toThrow(/version 99/);
  });

  it("rejects a kind mismatch", () => {
    expect(() => parseCsv(read("sweep.csv"), "solve")).toThrow(/kind/);
  });

  it("raises on data-free files", () => {
    const text = "# aircomp-csv-schema 1 kind=sweep\nparam,param_value,method,mean_R,std_R,n\n";
    expect(() => parseCsv(text)).toThrow(EmptyDataError);
  });
});

describe.each([
  ["sweep", plotSweep, "sweep.csv"],
  ["violin", plotViolin, "solve.csv"],
  ["training", plotTraining, "training.csv"],
  ["heatmap", plotHeatmap, "heatmap.csv"],
] as const)("plot %s", (name, fn, fixture) => {
  it("renders a non-trivial SVG document", () => {
    const svg = fn(read(fixture));
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
    expect(svg.length).toBeGreaterThan(500);
  });

  it("propagates schema failures instead of drawing", () => {
    const bad = read(fixture).replace("aircomp-csv-schema 1", "aircomp-csv-schema 7");
    expect(() => fn(bad)).toThrow(SchemaError);
  });
});

describe("plot content", () => {
  it("sweep draws one line per method with a legend", () => {
    const svg = plotSweep(read("sweep.csv"));
    const methods = new Set(
      read("sweep.csv")
        .split("\n")
        .slice(2)
        .filter((l) => l.length > 0)
        .map((l) => l.split(",")[2]),
    );
    expect((svg.match(/<polyline/g) ?? []).length).toBe(methods.size);
    for (const m of methods) expect(svg).toContain(m);
  });

  it("violin draws one shape and median bar per method", () => {
    const svg = plotViolin(read("solve.csv"));
    const methods = new Set(
      read("solve.csv")
        .split("\n")
        .slice(2)
        .filter((l) => l.length > 0)
        .map((l) => l.split(",")[5]),
    );
    expect((svg.match(/<polygon/g) ?? []).length).toBe(methods.size);
  });

  it("training marks the stage switch", () => {
    const svg = plotTraining(read("training.csv"));
    expect(svg).toContain("stage 2");
  });

  it("heatmap draws a cell per cluster pair and method", () => {
    const text = read("heatmap.csv");
    const rows = text.split("\n").slice(2).filter((l) => l.length > 0);
    const k = text.split("\n")[1].split(",").filter((c) => c.startsWith("pw_")).length;
    const svg = plotHeatmap(text);
    expect((svg.match(/<rect [^>]*fill="rgb/g) ?? []).length).toBe(rows.length * k);
  });
});
