import Papa from "papaparse";
import { z } from "zod";

export const SUMMARY_COLUMNS = [
  "group",
  "method",
  "setting",
  "alpha",
  "denominator",
  "rejection_rate",
  "ci_lo",
  "ci_hi",
] as const;

export class SchemaError extends Error {}

/**
 * One summary row. Numeric fields keep both the parsed value and the raw
 * CSV text; figures carry the raw text through untouched so emitted data
 * attributes compare byte-for-byte against the file they came from.
 */
export interface SummaryRow {
  group: string;
  method: string;
  setting: number;
  alpha: number;
  denominator: string;
  rejectionRate: number | null;
  ciLo: number | null;
  ciHi: number | null;
  raw: {
    setting: string;
    alpha: string;
    rejectionRate: string;
    ciLo: string;
    ciHi: string;
  };
}

const numericText = z.string().refine(
  (s) => s.trim() !== "" && Number.isFinite(Number(s)),
  { message: "must be a finite number" },
);

// blank cells mean "no qualifying trials at this setting"; rows with a
// blank rate exist in the file but carry nothing to draw
const rateText = z.union([
  z.literal(""),
  z.string().refine(
    (s) => {
      const v = Number(s);
      return Number.isFinite(v) && v >= 0 && v <= 1;
    },
    { message: "must be blank or a number in [0, 1]" },
  ),
]);

const rowSchema = z.object({
  group: z.string().min(1),
  method: z.string().min(1),
  setting: numericText,
  alpha: numericText,
  denominator: z.string().min(1),
  rejection_rate: rateText,
  ci_lo: rateText,
  ci_hi: rateText,
});

function toNullableNumber(text: string): number | null {
  return text === "" ? null : Number(text);
}

/**
 * Parse a study summary CSV (harness schema, `#`-prefixed footer allowed).
 * Throws SchemaError naming any missing or unexpected columns, or the first
 * offending row.
 */
export function parseSummaryCsv(text: string): SummaryRow[] {
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    comments: "#",
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  const missing = SUMMARY_COLUMNS.filter((c) => !fields.includes(c));
  const extra = fields.filter(
    (c) => !(SUMMARY_COLUMNS as readonly string[]).includes(c),
  );
  if (missing.length > 0 || extra.length > 0) {
    throw new SchemaError(
      `summary CSV columns mismatch: missing [${missing.join(", ")}], ` +
        `unexpected [${extra.join(", ")}]`,
    );
  }
  const rows: SummaryRow[] = [];
  parsed.data.forEach((record, i) => {
    const checked = rowSchema.safeParse(record);
    if (!checked.success) {
      const issue = checked.error.issues[0];
      const where = issue ? issue.path.join(".") : "row";
      const detail = issue ? issue.message : "invalid";
      throw new SchemaError(`row ${i + 2}: ${where} ${detail}`);
    }
    const r = checked.data;
    rows.push({
      group: r.group,
      method: r.method,
      setting: Number(r.setting),
      alpha: Number(r.alpha),
      denominator: r.denominator,
      rejectionRate: toNullableNumber(r.rejection_rate),
      ciLo: toNullableNumber(r.ci_lo),
      ciHi: toNullableNumber(r.ci_hi),
      raw: {
        setting: r.setting,
        alpha: r.alpha,
        rejectionRate: r.rejection_rate,
        ciLo: r.ci_lo,
        ciHi: r.ci_hi,
      },
    });
  });
  if (rows.length === 0) {
    throw new SchemaError("summary CSV has no data rows");
  }
  return rows;
}
