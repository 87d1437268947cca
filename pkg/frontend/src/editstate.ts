/** Client edit state: threshold, dilation, the pencil overlay, dirty flag. */

import { FORCE_OFF, FORCE_ON, NEUTRAL, composeMask, pencilLine } from "./maskpath.js";
import { encodeOverlayRle, type Run } from "./rle.js";

export type PencilMode = "add" | "delete" | "off";

export class ClientEditState {
  threshold = 0.5;
  dilation = 0;
  overlay: Uint8Array;
  /** true when there are edits the server has not seen yet */
  dirty = false;

  constructor(readonly width: number, readonly height: number) {
    this.overlay = new Uint8Array(width * height);
  }

  setThreshold(t: number): void {
    if (t === this.threshold) return;
    this.threshold = t;
    this.dirty = true;
  }

  setDilation(k: number): void {
    if (k === this.dilation) return;
    this.dilation = k;
    this.dirty = true;
  }

  pencilAt(x: number, y: number, mode: PencilMode): boolean {
    if (mode === "off") return false;
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return false;
    this.overlay[y * this.width + x] = mode === "add" ? FORCE_ON : FORCE_OFF;
    this.dirty = true;
    return true;
  }

  /** Gap-free stroke segment between two pointer samples. */
  pencilStroke(x0: number, y0: number, x1: number, y1: number,
               mode: PencilMode): void {
    for (const [x, y] of pencilLine(x0, y0, x1, y1)) {
      this.pencilAt(x, y, mode);
    }
  }

  clearPencil(x: number, y: number): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    if (this.overlay[y * this.width + x] !== NEUTRAL) {
      this.overlay[y * this.width + x] = NEUTRAL;
      this.dirty = true;
    }
  }

  runs(): Run[] {
    return encodeOverlayRle(this.overlay);
  }

  compose(prob: Float32Array): Uint8Array {
    return composeMask(prob, this.width, this.height,
                       this.threshold, this.dilation, this.overlay);
  }
}
