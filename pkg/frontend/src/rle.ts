/** Run-length coding of the edit overlay for the mask upload body. */

import { NEUTRAL } from "./maskpath.js";

export type Run = [start: number, length: number, state: number];

export function encodeOverlayRle(overlay: Uint8Array): Run[] {
  const runs: Run[] = [];
  let i = 0;
  while (i < overlay.length) {
    const state = overlay[i];
    let j = i + 1;
    while (j < overlay.length && overlay[j] === state) j++;
    if (state !== NEUTRAL) runs.push([i, j - i, state]);
    i = j;
  }
  return runs;
}

export function decodeOverlayRle(
  runs: Run[],
  width: number,
  height: number,
): Uint8Array {
  const total = width * height;
  const out = new Uint8Array(total);
  for (const [start, length, state] of runs) {
    if (!Number.isInteger(start) || !Number.isInteger(length)
        || length < 1 || start < 0 || start + length > total
        || state < 0 || state > 2) {
      throw new Error(`malformed RLE run (${start}, ${length}, ${state})`);
    }
    out.fill(state, start, start + length);
  }
  return out;
}
