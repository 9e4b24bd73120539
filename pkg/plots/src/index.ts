export {
  SUMMARY_COLUMNS,
  SchemaError,
  parseSummaryCsv,
  type SummaryRow,
} from "./schema.js";
export {
  AXIS_LABELS,
  FIGURE_KINDS,
  METHOD_COLORS,
  METHOD_ORDER,
  buildFacets,
  methodsIn,
  plottedRows,
  seriesPoints,
  xDomain,
  yDomain,
  type Facet,
  type FigureKind,
} from "./figure.js";
export { renderFigure } from "./render.js";
export { runCli, type CliOptions } from "./cli.js";
