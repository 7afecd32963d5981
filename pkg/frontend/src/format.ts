/** Display formatting shared across views. */

const UNITS = ["B", "KiB", "MiB", "GiB", "TiB"];

export function formatBytes(n: number): string {
  if (!Number.isFinite(n) || n < 0) return "–";
  let value = n;
  let unit = 0;
  while (value >= 1024 && unit < UNITS.length - 1) {
    value /= 1024;
    unit += 1;
  }
  const rounded = unit === 0 ? String(value) : value.toFixed(1);
  return `${rounded} ${UNITS[unit]}`;
}

export function formatDate(iso: string | null | undefined): string {
  if (!iso) return "–";
  return iso.slice(0, 10);
}

/** Completed fraction of an upload entry, clamped to [0, 1]. */
export function progressFraction(bytesReceived: number, declaredSize: number): number {
  if (declaredSize <= 0) return bytesReceived > 0 ? 1 : 0;
  return Math.min(1, Math.max(0, bytesReceived / declaredSize));
}

export function percentLabel(fraction: number): string {
  return `${Math.round(fraction * 100)}%`;
}

/** "study_purpose" -> "Study purpose" for overview section headings. */
export function sectionTitle(key: string): string {
  const words = key.split("_").join(" ");
  return words.charAt(0).toUpperCase() + words.slice(1);
}
