import { scaleLinear } from "d3-scale";
import { line } from "d3-shape";

import {
  AXIS_LABELS,
  Facet,
  FigureKind,
  METHOD_COLORS,
  buildFacets,
  methodsIn,
  seriesPoints,
  xDomain,
  yDomain,
} from "./figure.js";
import { SummaryRow } from "./schema.js";

const PANEL_W = 340;
const PANEL_H = 250;
const MARGIN = { top: 30, right: 16, bottom: 46, left: 52 };
const GAP = 22;
const LEGEND_H = 28;
const MAX_COLS = 3;

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(v: number): string {
  // trim float dust from pixel coordinates
  return Number(v.toFixed(3)).toString();
}

function renderFacet(
  facet: Facet,
  kind: FigureKind,
  alpha: number,
  ox: number,
  oy: number,
): string {
  const innerW = PANEL_W - MARGIN.left - MARGIN.right;
  const innerH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const x = scaleLinear().domain(xDomain(facet.rows)).range([0, innerW]);
  const y = scaleLinear().domain(yDomain(facet.rows, alpha)).range([innerH, 0]);
  const xTicks = x.ticks(5);
  const yTicks = y.ticks(5);
  const fmtX = x.tickFormat(5);
  const fmtY = y.tickFormat(5);

  const parts: string[] = [];
  parts.push(
    `<g class="facet" data-facet="${escapeXml(facet.title)}" ` +
      `transform="translate(${ox + MARGIN.left},${oy + MARGIN.top})">`,
  );
  parts.push(
    `<text class="title" x="${innerW / 2}" y="-10" text-anchor="middle" ` +
      `font-weight="600">${escapeXml(facet.title)}</text>`,
  );
  parts.push(
    `<rect x="0" y="0" width="${innerW}" height="${innerH}" fill="none" ` +
      `stroke="#999" stroke-width="1"/>`,
  );
  for (const t of yTicks) {
    const py = fmt(y(t));
    parts.push(
      `<line x1="0" x2="${innerW}" y1="${py}" y2="${py}" stroke="#eee"/>`,
      `<text x="-8" y="${py}" dy="0.32em" text-anchor="end" ` +
        `font-size="10">${fmtY(t)}</text>`,
    );
  }
  for (const t of xTicks) {
    const px = fmt(x(t));
    parts.push(
      `<line x1="${px}" x2="${px}" y1="${innerH}" y2="${innerH + 4}" stroke="#999"/>`,
      `<text x="${px}" y="${innerH + 16}" text-anchor="middle" ` +
        `font-size="10">${fmtX(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${innerW / 2}" y="${innerH + 34}" text-anchor="middle" ` +
      `font-size="11">${escapeXml(AXIS_LABELS[kind])}</text>`,
  );
  parts.push(
    `<text transform="translate(${-38},${innerH / 2}) rotate(-90)" ` +
      `text-anchor="middle" font-size="11">rejection rate</text>`,
  );

  const alphaRaw = facet.rows[0]?.raw.alpha ?? String(alpha);
  const ay = fmt(y(alpha));
  parts.push(
    `<line class="alpha-line" data-alpha="${escapeXml(alphaRaw)}" ` +
      `x1="0" x2="${innerW}" y1="${ay}" y2="${ay}" ` +
      `stroke="#555" stroke-dasharray="5,4"/>`,
  );

  const path = line<SummaryRow>()
    .x((r) => x(r.setting))
    .y((r) => y(r.rejectionRate as number));
  for (const method of methodsIn(facet.rows)) {
    const pts = seriesPoints(facet.rows, method);
    const color = METHOD_COLORS[method] ?? "#444";
    if (pts.length > 1) {
      parts.push(
        `<path class="series" data-method="${escapeXml(method)}" ` +
          `d="${path(pts) ?? ""}" fill="none" stroke="${color}" ` +
          `stroke-width="1.8"/>`,
      );
    }
    for (const r of pts) {
      const px = fmt(x(r.setting));
      if (r.ciLo !== null && r.ciHi !== null) {
        parts.push(
          `<line class="ci" data-method="${escapeXml(method)}" ` +
            `x1="${px}" x2="${px}" y1="${fmt(y(r.ciLo))}" ` +
            `y2="${fmt(y(r.ciHi))}" stroke="${color}" ` +
            `stroke-width="1" opacity="0.55"/>`,
        );
      }
      parts.push(
        `<circle class="pt" data-group="${escapeXml(r.group)}" ` +
          `data-method="${escapeXml(r.method)}" ` +
          `data-setting="${escapeXml(r.raw.setting)}" ` +
          `data-alpha="${escapeXml(r.raw.alpha)}" ` +
          `data-denominator="${escapeXml(r.denominator)}" ` +
          `data-rate="${escapeXml(r.raw.rejectionRate)}" ` +
          `data-ci-lo="${escapeXml(r.raw.ciLo)}" ` +
          `data-ci-hi="${escapeXml(r.raw.ciHi)}" ` +
          `cx="${px}" cy="${fmt(y(r.rejectionRate as number))}" r="3.2" ` +
          `fill="${color}"/>`,
      );
    }
  }
  parts.push("</g>");
  return parts.join("\n");
}

function renderLegend(methods: string[], width: number): string {
  const itemW = 110;
  const startX = Math.max(8, (width - methods.length * itemW) / 2);
  const parts = [`<g class="legend" transform="translate(${startX},14)">`];
  methods.forEach((method, i) => {
    const color = METHOD_COLORS[method] ?? "#444";
    const px = i * itemW;
    parts.push(
      `<line x1="${px}" x2="${px + 18}" y1="0" y2="0" stroke="${color}" ` +
        `stroke-width="2"/>`,
      `<circle cx="${px + 9}" cy="0" r="3" fill="${color}"/>`,
      `<text x="${px + 24}" y="0" dy="0.32em" font-size="11">` +
        `${escapeXml(method)}</text>`,
    );
  });
  parts.push("</g>");
  return parts.join("\n");
}

/**
 * Render one figure as a standalone SVG document: one panel per covariance
 * or family (and per denominator for power studies), methods as colored
 * series with binomial CI bars, and a dashed reference line at alpha.
 * Every drawn point carries its CSV values verbatim in data attributes.
 */
export function renderFigure(
  rows: SummaryRow[],
  kind: FigureKind,
  alpha: number,
): string {
  const facets = buildFacets(rows, kind, alpha);
  const cols = Math.min(MAX_COLS, facets.length);
  const nrows = Math.ceil(facets.length / cols);
  const width = cols * PANEL_W + (cols - 1) * GAP;
  const height = LEGEND_H + nrows * (PANEL_H + GAP) - GAP;

  const methods = methodsIn(facets.flatMap((f) => f.rows));
  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `font-family="Helvetica, Arial, sans-serif" data-kind="${kind}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    renderLegend(methods, width),
  ];
  facets.forEach((facet, i) => {
    const ox = (i % cols) * (PANEL_W + GAP);
    const oy = LEGEND_H + Math.floor(i / cols) * (PANEL_H + GAP);
    parts.push(renderFacet(facet, kind, alpha, ox, oy));
  });
  parts.push("</svg>");
  return parts.join("\n");
}
