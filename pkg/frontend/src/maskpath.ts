/**
 * Mask path: threshold -> dilate -> edit overlay, mirroring the server.
 *
 * Dilation by a 3x3 square iterated k times equals a (2k+1)-square window
 * OR, which separates by axis; the sliding-window form below is O(n) per
 * axis regardless of k, fast enough to re-run per slider tick at 4 MP.
 */

export const NEUTRAL = 0;
export const FORCE_ON = 1;
export const FORCE_OFF = 2;

/** prob >= t on finite values; the comparison is in f64, like the server. */
export function threshold(
  prob: Float32Array,
  t: number,
  out?: Uint8Array,
): Uint8Array {
  const mask = out ?? new Uint8Array(prob.length);
  for (let i = 0; i < prob.length; i++) {
    const p = prob[i];
    mask[i] = Number.isFinite(p) && p >= t ? 1 : 0;
  }
  return mask;
}

/** Binary dilation by a 3x3 square, `iterations` times, borders clipped. */
export function dilate(
  mask: Uint8Array,
  width: number,
  height: number,
  iterations: number,
): Uint8Array {
  if (iterations <= 0) return mask.slice();
  const k = iterations;
  // horizontal pass: any set pixel within +-k columns
  const horiz = new Uint8Array(mask.length);
  for (let y = 0; y < height; y++) {
    const row = y * width;
    let run = 0; // count of set pixels in the current window
    for (let x = -k; x < width; x++) {
      const enter = x + k;
      if (enter < width && mask[row + enter]) run++;
      const leave = x - k - 1;
      if (leave >= 0 && mask[row + leave]) run--;
      if (x >= 0) horiz[row + x] = run > 0 ? 1 : 0;
    }
  }
  // vertical pass over the horizontal result
  const out = new Uint8Array(mask.length);
  for (let x = 0; x < width; x++) {
    let run = 0;
    for (let y = -k; y < height; y++) {
      const enter = y + k;
      if (enter < height && horiz[enter * width + x]) run++;
      const leave = y - k - 1;
      if (leave >= 0 && horiz[leave * width + x]) run--;
      if (y >= 0) out[y * width + x] = run > 0 ? 1 : 0;
    }
  }
  return out;
}

export function applyOverlay(mask: Uint8Array, overlay: Uint8Array): Uint8Array {
  if (mask.length !== overlay.length) {
    throw new Error("mask/overlay size mismatch");
  }
  const out = mask.slice();
  for (let i = 0; i < overlay.length; i++) {
    const state = overlay[i];
    if (state === FORCE_ON) out[i] = 1;
    else if (state === FORCE_OFF) out[i] = 0;
  }
  return out;
}

export function composeMask(
  prob: Float32Array,
  width: number,
  height: number,
  t: number,
  dilation: number,
  overlay: Uint8Array,
): Uint8Array {
  return applyOverlay(dilate(threshold(prob, t), width, height, dilation), overlay);
}

/** 4-connected line between pointer samples so strokes have no gaps. */
export function pencilLine(
  x0: number, y0: number, x1: number, y1: number,
): Array<[number, number]> {
  const points: Array<[number, number]> = [[x0, y0]];
  let x = x0;
  let y = y0;
  const dx = Math.sign(x1 - x0);
  const dy = Math.sign(y1 - y0);
  const ax = Math.abs(x1 - x0);
  const ay = Math.abs(y1 - y0);
  let ex = 0;
  let ey = 0;
  while (x !== x1 || y !== y1) {
    // step the axis whose normalized error is furthest behind
    if (y === y1 || (x !== x1 && (ex + 1) * ay <= (ey + 1) * ax)) {
      x += dx;
      ex++;
    } else {
      y += dy;
      ey++;
    }
    points.push([x, y]);
  }
  return points;
}
