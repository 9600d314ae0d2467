/**
 * kvlines codec: one `key=value` pair per line, UTF-8, sorted keys,
 * trailing newline, no escaping. The station speaks nothing else.
 */

export type KvRecord = Record<string, string>;

export function kvDecode(text: string): KvRecord {
  const out: KvRecord = {};
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (line === "" || line.startsWith("#")) continue;
    const idx = line.indexOf("=");
    if (idx < 0) throw new Error(`malformed kvlines entry: ${line}`);
    out[line.slice(0, idx).trim()] = line.slice(idx + 1).trim();
  }
  return out;
}

export function kvEncode(record: Record<string, string | number | boolean>): string {
  const keys = Object.keys(record).sort();
  const lines = keys.map((k) => {
    const v = record[k];
    const s = typeof v === "boolean" ? (v ? "true" : "false") : String(v);
    return `${k}=${s}`;
  });
  return lines.join("\n") + "\n";
}

export function kvNumber(rec: KvRecord, key: string, fallback = 0): number {
  const v = rec[key];
  if (v === undefined) return fallback;
  const n = Number(v);
  if (Number.isNaN(n)) throw new Error(`kvlines key ${key} is not numeric: ${v}`);
  return n;
}

export function kvBool(rec: KvRecord, key: string, fallback = false): boolean {
  const v = rec[key];
  if (v === undefined) return fallback;
  return v === "true" || v === "True";
}

/** Parse a `x,y; x,y; ...` polygon value. */
export function parsePolygon(value: string): { x: number; y: number }[] {
  if (value.trim() === "") return [];
  return value.split(";").map((pair) => {
    const [xs, ys] = pair.split(",");
    const x = Number(xs);
    const y = Number(ys);
    if (Number.isNaN(x) || Number.isNaN(y)) {
      throw new Error(`malformed polygon vertex: ${pair}`);
    }
    return { x, y };
  });
}

/** Collect `prefix.1`, `prefix.2`, ... values in index order. */
export function numberedValues(rec: KvRecord, prefix: string): string[] {
  const out: string[] = [];
  for (let i = 1; ; i++) {
    const v = rec[`${prefix}.${i}`];
    if (v === undefined) break;
    out.push(v);
  }
  return out;
}
