import { max } from "d3-array";

import { SchemaError, SummaryRow } from "./schema.js";

export type FigureKind = "type1" | "power" | "robustness";

export const FIGURE_KINDS: readonly FigureKind[] = [
  "type1",
  "power",
  "robustness",
];

// settings axis per kind: image size for null studies, signal strength for
// power, distribution distance for robustness
export const AXIS_LABELS: Record<FigureKind, string> = {
  type1: "image size n",
  power: "signal strength",
  robustness: "W1 distance to normal",
};

export const METHOD_ORDER = [
  "selective",
  "oc",
  "naive",
  "bonferroni",
  "permutation",
] as const;

export const METHOD_COLORS: Record<string, string> = {
  selective: "#0072b2",
  oc: "#e69f00",
  naive: "#d55e00",
  bonferroni: "#009e73",
  permutation: "#cc79a7",
};

export interface Facet {
  /** chart title, e.g. "identity" or "identity / all trials" */
  title: string;
  rows: SummaryRow[];
}

function facetKey(kind: FigureKind, row: SummaryRow): string {
  if (kind === "power") {
    const label = row.denominator === "all" ? "all trials" : row.denominator;
    return `${row.group} / ${label}`;
  }
  return row.group;
}

/**
 * The rows a figure draws: matching alpha, with a drawn rate. Exposed so
 * the round-trip test filters the CSV with the same rule the renderer uses.
 */
export function plottedRows(
  rows: SummaryRow[],
  alpha: number,
): SummaryRow[] {
  return rows.filter(
    (r) => r.alpha === alpha && r.rejectionRate !== null,
  );
}

export function buildFacets(
  rows: SummaryRow[],
  kind: FigureKind,
  alpha: number,
): Facet[] {
  const drawn = plottedRows(rows, alpha);
  if (drawn.length === 0) {
    const seen = [...new Set(rows.map((r) => r.alpha))].sort();
    throw new SchemaError(
      `no drawable rows at alpha=${alpha} (file has alpha in [${seen.join(", ")}])`,
    );
  }
  const byKey = new Map<string, SummaryRow[]>();
  for (const row of drawn) {
    const key = facetKey(kind, row);
    const bucket = byKey.get(key);
    if (bucket) bucket.push(row);
    else byKey.set(key, [row]);
  }
  return [...byKey.entries()].map(([title, facetRows]) => ({
    title,
    rows: facetRows,
  }));
}

export function methodsIn(rows: SummaryRow[]): string[] {
  const present = new Set(rows.map((r) => r.method));
  const ordered = METHOD_ORDER.filter((m) => present.has(m));
  const unknown = [...present].filter(
    (m) => !(METHOD_ORDER as readonly string[]).includes(m),
  );
  return [...ordered, ...unknown.sort()];
}

/** Series points sorted by setting; values pass through unchanged. */
export function seriesPoints(
  rows: SummaryRow[],
  method: string,
): SummaryRow[] {
  return rows
    .filter((r) => r.method === method)
    .slice()
    .sort((a, b) => a.setting - b.setting);
}

/** y axis always shows [0, at least max(rate, ci, 2*alpha)]. */
export function yDomain(rows: SummaryRow[], alpha: number): [number, number] {
  const peak = max(
    rows.flatMap((r) => [r.rejectionRate ?? 0, r.ciHi ?? 0]),
  ) ?? 0;
  return [0, Math.max(peak, 2 * alpha)];
}

export function xDomain(rows: SummaryRow[]): [number, number] {
  const settings = rows.map((r) => r.setting);
  let lo = Math.min(...settings);
  let hi = Math.max(...settings);
  if (lo === hi) {
    // single-setting chart: pad so the lone column sits mid-axis
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}
