/**
 * Conversion between platform string units (UTF-16 code units, what the
 * browser Selection API reports) and Unicode scalar value offsets (what the
 * annotation wire format uses everywhere).
 *
 * All offsets posted to the server are scalar-value offsets; the platform's
 * code-unit indices never leave the client.
 */

export interface SelectionOffsets {
  /** inclusive start, in Unicode scalar values */
  start: number;
  /** exclusive end, in Unicode scalar values */
  end: number;
}

export class SelectionError extends Error {}

function isLowSurrogate(unit: number): boolean {
  return unit >= 0xdc00 && unit <= 0xdfff;
}

/** Snap a code-unit index down to the nearest scalar boundary. */
function snapToBoundary(text: string, unitIndex: number): number {
  if (unitIndex > 0 && unitIndex < text.length && isLowSurrogate(text.charCodeAt(unitIndex))) {
    return unitIndex - 1;
  }
  return unitIndex;
}

/** Number of Unicode scalar values in the code-unit prefix [0, unitIndex). */
export function unitsToScalars(text: string, unitIndex: number): number {
  let scalars = 0;
  let i = 0;
  const boundary = snapToBoundary(text, unitIndex);
  while (i < boundary) {
    const code = text.codePointAt(i);
    if (code === undefined) break;
    i += code > 0xffff ? 2 : 1;
    scalars += 1;
  }
  return scalars;
}

/** Substring by scalar-value offsets, [start, end). */
export function scalarSlice(text: string, start: number, end: number): string {
  let unit = 0;
  let scalar = 0;
  let startUnit = -1;
  let endUnit = text.length;
  if (start === 0) startUnit = 0;
  while (unit < text.length) {
    if (scalar === start) startUnit = unit;
    if (scalar === end) {
      endUnit = unit;
      break;
    }
    const code = text.codePointAt(unit);
    if (code === undefined) break;
    unit += code > 0xffff ? 2 : 1;
    scalar += 1;
  }
  if (scalar === start) startUnit = unit;
  if (scalar === end) endUnit = unit;
  if (startUnit < 0) throw new SelectionError(`start ${start} beyond end of text`);
  return text.slice(startUnit, endUnit);
}

/** Total scalar values in the text. */
export function scalarLength(text: string): number {
  let n = 0;
  for (const _ of text) n += 1;
  return n;
}

/**
 * Convert a native selection (code-unit offsets within the paragraph) to
 * scalar-value offsets. Collapsed or out-of-bounds selections are rejected;
 * a boundary landing inside a surrogate pair is snapped outward so the
 * reported range always covers whole scalar values.
 */
export function selectionToOffsets(
  paragraph: string,
  unitStart: number,
  unitEnd: number,
): SelectionOffsets {
  if (unitStart > unitEnd) [unitStart, unitEnd] = [unitEnd, unitStart];
  if (unitStart === unitEnd) {
    throw new SelectionError('selection is collapsed; select the span to edit');
  }
  if (unitStart < 0 || unitEnd > paragraph.length) {
    throw new SelectionError('selection lies outside the paragraph');
  }
  const start = unitsToScalars(paragraph, unitStart);
  let end = unitsToScalars(paragraph, unitEnd);
  // snapping the end down would drop a half-selected character: extend it
  const snapped = snapToBoundary(paragraph, unitEnd);
  if (snapped !== unitEnd) end += 1;
  if (start === end) {
    throw new SelectionError('selection is collapsed; select the span to edit');
  }
  return { start, end };
}
