/**
 * Raster -> RGBA painting. Mask window colors: detected pixels in a cyan
 * highlight, pencil FORCE_ON green (#00C853), FORCE_OFF red (#D50000).
 * Magnification everywhere is nearest-neighbor so single pixels stay
 * editable.
 */

import { FORCE_OFF, FORCE_ON } from "./maskpath.js";

export const GREEN = [0x00, 0xc8, 0x53] as const;
export const RED = [0xd5, 0x00, 0x00] as const;
export const DETECTED = [0x00, 0xe5, 0xff] as const;

export function grayscaleRgba(display: Uint8Array): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(display.length * 4);
  for (let i = 0; i < display.length; i++) {
    const v = display[i];
    const o = i * 4;
    rgba[o] = v;
    rgba[o + 1] = v;
    rgba[o + 2] = v;
    rgba[o + 3] = 255;
  }
  return rgba;
}

/** Dimmed science image with the mask and pencil states highlighted. */
export function maskRgba(
  display: Uint8Array,
  mask: Uint8Array,
  overlay: Uint8Array,
): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(display.length * 4);
  for (let i = 0; i < display.length; i++) {
    const o = i * 4;
    const state = overlay[i];
    if (state === FORCE_ON) {
      rgba[o] = GREEN[0]; rgba[o + 1] = GREEN[1]; rgba[o + 2] = GREEN[2];
    } else if (state === FORCE_OFF) {
      rgba[o] = RED[0]; rgba[o + 1] = RED[1]; rgba[o + 2] = RED[2];
    } else if (mask[i]) {
      rgba[o] = DETECTED[0]; rgba[o + 1] = DETECTED[1]; rgba[o + 2] = DETECTED[2];
    } else {
      const v = display[i] >> 1; // dim the background for contrast
      rgba[o] = v; rgba[o + 1] = v; rgba[o + 2] = v;
    }
    rgba[o + 3] = 255;
  }
  return rgba;
}

export interface CanvasSurface {
  canvas: HTMLCanvasElement;
  ctx: CanvasRenderingContext2D;
  backing: HTMLCanvasElement;
  backingCtx: CanvasRenderingContext2D;
}

export function makeSurface(canvas: HTMLCanvasElement, imageWidth: number,
                            imageHeight: number): CanvasSurface {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");
  const backing = document.createElement("canvas");
  backing.width = imageWidth;
  backing.height = imageHeight;
  const backingCtx = backing.getContext("2d");
  if (!backingCtx) throw new Error("2d canvas context unavailable");
  return { canvas, ctx, backing, backingCtx };
}

export function paintSurface(
  surface: CanvasSurface,
  rgba: Uint8ClampedArray<ArrayBuffer>,
  transform: { scale: number; offsetX: number; offsetY: number },
): void {
  const { backing, backingCtx, ctx, canvas } = surface;
  backingCtx.putImageData(
    new ImageData(rgba, backing.width, backing.height), 0, 0);
  ctx.save();
  ctx.fillStyle = "#101014";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.imageSmoothingEnabled = false;
  ctx.setTransform(transform.scale, 0, 0, transform.scale,
                   transform.offsetX, transform.offsetY);
  ctx.drawImage(backing, 0, 0);
  ctx.restore();
}
