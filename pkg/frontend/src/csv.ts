/**
 * Reader for the simulator's results CSV.
 *
 * Contract: header `receiver,snr_db,ser,stderr,errors,symbols,trials,seed`,
 * one row per (receiver, SNR point).
 */

export interface SerRow {
  receiver: string;
  snrDb: number;
  ser: number;
  stderr: number;
  errors: number;
  symbols: number;
  trials: number;
  seed: number;
}

export const REQUIRED_COLUMNS = [
  "receiver", "snr_db", "ser", "stderr", "errors", "symbols", "trials", "seed",
] as const;

export function parseSerCsv(text: string, source = "<csv>"): SerRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new Error(`${source}: empty CSV`);
  }
  const header = lines[0].split(",").map((h) => h.trim());
  for (const col of REQUIRED_COLUMNS) {
    if (!header.includes(col)) {
      throw new Error(`${source}: missing column '${col}'`);
    }
  }
  const idx = Object.fromEntries(header.map((h, i) => [h, i]));
  const rows: SerRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length < header.length) {
      throw new Error(`${source}: line ${i + 1} has ${parts.length} fields, ` +
        `expected ${header.length}`);
    }
    const num = (col: string): number => {
      const v = Number(parts[idx[col]]);
      if (Number.isNaN(v)) {
        throw new Error(`${source}: line ${i + 1}: bad number in '${col}'`);
      }
      return v;
    };
    rows.push({
      receiver: parts[idx.receiver].trim(),
      snrDb: num("snr_db"),
      ser: num("ser"),
      stderr: num("stderr"),
      errors: num("errors"),
      symbols: num("symbols"),
      trials: num("trials"),
      seed: num("seed"),
    });
  }
  if (rows.length === 0) {
    throw new Error(`${source}: no data rows`);
  }
  return rows;
}

/** Merge rows from several files; receivers keep first-appearance order. */
export function mergeRows(tables: SerRow[][]): Map<string, SerRow[]> {
  const byReceiver = new Map<string, SerRow[]>();
  for (const table of tables) {
    for (const row of table) {
      const list = byReceiver.get(row.receiver) ?? [];
      list.push(row);
      byReceiver.set(row.receiver, list);
    }
  }
  for (const rows of byReceiver.values()) {
    rows.sort((a, b) => a.snrDb - b.snrDb);
  }
  return byReceiver;
}
