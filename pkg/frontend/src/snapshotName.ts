/** Snapshot file names carry time, error type and measured value; gallery
 * labels parse exactly from the name, never from separate fields. */

export const SNAPSHOT_NAME =
  /^(\d{8})ms_type(I|II|III|IV|V|VI)_([A-Za-z0-9p\-]+)\.(json|svg)$/;

export interface SnapshotLabel {
  t: number; // milliseconds
  errorType: string;
  value: string; // raw token, e.g. "3p0mm"
}

export function parseSnapshotName(name: string): SnapshotLabel | null {
  const m = SNAPSHOT_NAME.exec(name);
  if (!m) {
    return null;
  }
  return { t: parseInt(m[1], 10), errorType: m[2], value: m[3] };
}

/** "3p0mm" -> "3.0 mm"; "1-1clips" -> "1-1 clips"; "0retrieved" -> "0 retrieved". */
export function humanValue(token: string): string {
  const m = /^([0-9p\-]+)([A-Za-z]*)$/.exec(token);
  if (!m) {
    return token;
  }
  const num = m[1].replace(/p/g, ".");
  return m[2] ? `${num} ${m[2]}` : num;
}

/** e.g. "3.0 mm at 0.6 s, type I" */
export function galleryLabel(label: SnapshotLabel): string {
  const seconds = (label.t / 1000).toFixed(1);
  return `${humanValue(label.value)} at ${seconds} s, type ${label.errorType}`;
}
