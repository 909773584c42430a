/** The four figure kinds rendered from the simulator's CSV outputs.
 *
 * Normalization happens here, in the plot layer: the simulator's CSVs carry
 * raw values (IPC, busy fractions, costs already normalized at source).
 */

import { CsvError, num, parseCsv, requireColumns, Table } from "./csv.js";
import { linearScale, log2Scale, PALETTE, SvgBuilder, ticks, fmt } from "./svg.js";

export type FigureKind = "busy" | "cost" | "latency-sweep" | "perf-bars";

export interface FigureSpec {
  kind: FigureKind;
  inputPath: string;
  text: string;
}

export function render(spec: FigureSpec): string {
  const table = parseCsv(spec.text, spec.inputPath);
  switch (spec.kind) {
    case "busy": return busyFigure(table, spec.inputPath);
    case "cost": return costFigure(table, spec.inputPath);
    case "latency-sweep": return latencyFigure(table, spec.inputPath);
    case "perf-bars": return perfFigure(table, spec.inputPath);
    default: throw new CsvError(`unknown figure kind ${spec.kind as string}`);
  }
}

function groupBy(table: Table, column: string): Map<string, Record<string, string>[]> {
  const out = new Map<string, Record<string, string>[]>();
  for (const row of table.rows) {
    const key = row[column]!;
    if (!out.has(key)) out.set(key, []);
    out.get(key)!.push(row);
  }
  return out;
}

/** Busy fraction versus configured threshold, one line per mechanism. */
export function busyFigure(table: Table, path: string): string {
  requireColumns(table, ["mechanism", "nrh", "busy_fraction"], path);
  const svg = new SvgBuilder();
  const nrhs = table.rows.map((r) => num(r, "nrh"));
  const fracs = table.rows.map((r) => num(r, "busy_fraction"));
  const x = log2Scale([Math.min(...nrhs), Math.max(...nrhs)],
                      [svg.plotLeft, svg.plotRight]);
  const yMax = Math.max(...fracs) * 1.08 || 1;
  const y = linearScale([0, yMax], [svg.plotBottom, svg.plotTop]);
  svg.title("Time spent on preventive refreshes");
  svg.xAxis(x, [...new Set(nrhs)].sort((a, b) => a - b), "disturbance threshold");
  svg.yAxis(y, ticks(0, yMax), "busy fraction");
  const legend: [string, string][] = [];
  let i = 0;
  for (const [mech, rows] of groupBy(table, "mechanism")) {
    const color = PALETTE[i++ % PALETTE.length]!;
    const pts = rows
      .map((r) => [num(r, "nrh"), num(r, "busy_fraction")] as [number, number])
      .sort((a, b) => a[0] - b[0])
      .map(([nx, ny]) => [x(nx), y(ny)] as [number, number]);
    svg.polyline(pts, color);
    legend.push([mech, color]);
  }
  svg.legend(legend, svg.plotLeft + 12);
  return svg.render();
}

export interface CostMinimum {
  level: number;
  cost: number;
}

/** Tie-break toward the larger (less aggressive) latency factor. */
export function costMinimum(table: Table, column: string): CostMinimum {
  let best: CostMinimum | null = null;
  for (const row of table.rows) {
    const level = num(row, "m_factor");
    const cost = num(row, column);
    if (best === null || cost < best.cost - 1e-12 ||
        (Math.abs(cost - best.cost) <= 1e-12 && level > best.level)) {
      best = { level, cost };
    }
  }
  return best!;
}

/** Normalized time/energy cost curves with their minima marked. */
export function costFigure(table: Table, path: string): string {
  requireColumns(table, ["m_factor", "total_time_cost", "total_energy_cost"], path);
  const svg = new SvgBuilder();
  const levels = table.rows.map((r) => num(r, "m_factor"));
  const costs = table.rows.flatMap((r) => [num(r, "total_time_cost"),
                                           num(r, "total_energy_cost")]);
  const x = linearScale([Math.min(...levels), Math.max(...levels)],
                        [svg.plotLeft, svg.plotRight]);
  const yMax = Math.max(...costs, 1) * 1.08;
  const y = linearScale([0, yMax], [svg.plotBottom, svg.plotTop]);
  svg.title("Preventive refresh cost vs restoration latency");
  svg.xAxis(x, levels, "fraction of nominal restoration latency");
  svg.yAxis(y, ticks(0, yMax), "normalized cost");
  const series: [string, string, string][] = [
    ["total_time_cost", "time cost", PALETTE[0]!],
    ["total_energy_cost", "energy cost", PALETTE[1]!],
  ];
  const legend: [string, string][] = [];
  for (const [column, label, color] of series) {
    const pts = table.rows
      .map((r) => [num(r, "m_factor"), num(r, column)] as [number, number])
      .sort((a, b) => a[0] - b[0])
      .map(([lx, ly]) => [x(lx), y(ly)] as [number, number]);
    svg.polyline(pts, color);
    const min = costMinimum(table, column);
    svg.circle(x(min.level), y(min.cost), 6, color,
               `stroke="#222" stroke-width="1.5" data-series="${column}" ` +
               `data-min-level="${fmt(min.level)}"`);
    legend.push([label, color]);
  }
  svg.legend(legend, svg.plotLeft + 12);
  return svg.render();
}

/** IPC versus restoration latency, normalized to the nominal-latency run. */
export function latencyFigure(table: Table, path: string): string {
  requireColumns(table, ["mechanism", "m_factor", "ipc"], path);
  const svg = new SvgBuilder();
  const groups = groupBy(table, "mechanism");
  const normalized: [string, [number, number][]][] = [];
  for (const [mech, rows] of groups) {
    const base = rows.find((r) => Math.abs(num(r, "m_factor") - 1.0) < 1e-9);
    if (!base) {
      throw new CsvError(`${path}: mechanism ${mech} has no m_factor=1.00 baseline`);
    }
    const baseIpc = num(base, "ipc");
    normalized.push([mech, rows
      .map((r) => [num(r, "m_factor"), num(r, "ipc") / baseIpc] as [number, number])
      .sort((a, b) => a[0] - b[0])]);
  }
  const allLevels = table.rows.map((r) => num(r, "m_factor"));
  const allVals = normalized.flatMap(([, pts]) => pts.map(([, v]) => v));
  const x = linearScale([Math.min(...allLevels), Math.max(...allLevels)],
                        [svg.plotLeft, svg.plotRight]);
  const lo = Math.min(...allVals, 1) * 0.98;
  const hi = Math.max(...allVals, 1) * 1.02;
  const y = linearScale([lo, hi], [svg.plotBottom, svg.plotTop]);
  svg.title("Performance vs preventive refresh latency");
  svg.xAxis(x, [...new Set(allLevels)].sort((a, b) => a - b),
            "fraction of nominal restoration latency");
  svg.yAxis(y, ticks(lo, hi), "IPC normalized to nominal latency");
  svg.line(svg.plotLeft, y(1), svg.plotRight, y(1), "#999", 1);
  const legend: [string, string][] = [];
  let i = 0;
  for (const [mech, pts] of normalized) {
    const color = PALETTE[i++ % PALETTE.length]!;
    svg.polyline(pts.map(([lx, ly]) => [x(lx), y(ly)] as [number, number]), color);
    legend.push([mech, color]);
  }
  svg.legend(legend, svg.plotLeft + 12);
  return svg.render();
}

/** Grouped bars: IPC per mechanism/config, normalized to the unmitigated run. */
export function perfFigure(table: Table, path: string): string {
  requireColumns(table, ["mechanism", "config", "ipc"], path);
  const svg = new SvgBuilder(720, 400);
  const groups = groupBy(table, "mechanism");
  const configs = [...new Set(table.rows.map((r) => r.config!))]
    .filter((c) => c !== "none");
  const mechs = [...groups.keys()];
  const values = new Map<string, Map<string, number>>();
  let hi = 1;
  for (const [mech, rows] of groups) {
    const base = rows.find((r) => r.config === "none");
    if (!base) {
      throw new CsvError(`${path}: mechanism ${mech} has no "none" baseline row`);
    }
    const baseIpc = num(base, "ipc");
    const per = new Map<string, number>();
    for (const row of rows) {
      if (row.config === "none") continue;
      const v = num(row, "ipc") / baseIpc;
      per.set(row.config!, v);
      hi = Math.max(hi, v);
    }
    values.set(mech, per);
  }
  const y = linearScale([0, hi * 1.08], [svg.plotBottom, svg.plotTop]);
  svg.title("Performance normalized to no mitigation");
  svg.yAxis(y, ticks(0, hi * 1.08), "normalized IPC");
  svg.line(svg.plotLeft, y(1), svg.plotRight, y(1), "#999", 1);
  const groupWidth = (svg.plotRight - svg.plotLeft) / mechs.length;
  const barWidth = (groupWidth * 0.8) / Math.max(1, configs.length);
  mechs.forEach((mech, mi) => {
    const x0 = svg.plotLeft + mi * groupWidth + groupWidth * 0.1;
    configs.forEach((config, ci) => {
      const v = values.get(mech)!.get(config);
      if (v === undefined) return;
      const top = y(v);
      svg.rect(x0 + ci * barWidth, top, barWidth - 2, svg.plotBottom - top,
               PALETTE[ci % PALETTE.length]!,
               `data-mechanism="${mech}" data-config="${config}"`);
    });
    svg.text(x0 + groupWidth * 0.4, svg.plotBottom + 18, mech,
             'text-anchor="middle"');
  });
  svg.line(svg.plotLeft, svg.plotBottom, svg.plotRight, svg.plotBottom);
  svg.legend(configs.map((c, i) => [c, PALETTE[i % PALETTE.length]!]),
             svg.plotRight - 150, svg.plotTop + 4);
  svg.text((svg.plotLeft + svg.plotRight) / 2, svg.height - 8,
           "mitigation mechanism", 'text-anchor="middle" font-weight="bold"');
  return svg.render();
}
