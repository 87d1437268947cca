import { deflateSync } from "node:zlib";

import { describe, expect, it } from "vitest";

import { decodeFrame } from "../src/frame.js";
import {
  FORCE_OFF,
  FORCE_ON,
  applyOverlay,
  dilate,
  pencilLine,
  threshold,
} from "../src/maskpath.js";
import { medianSorted, portableLog, treeSum } from "../src/numerics.js";
import { parseNpy, serializeNpy } from "../src/npy.js";
import { decodeOverlayRle, encodeOverlayRle } from "../src/rle.js";

function bruteDilate(mask: Uint8Array, width: number, height: number,
                     iterations: number): Uint8Array {
  let grid = mask.slice();
  for (let it = 0; it < iterations; it++) {
    const next = new Uint8Array(grid.length);
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let hit = 0;
        for (let dy = -1; dy <= 1; dy++) {
          for (let dx = -1; dx <= 1; dx++) {
            const ny = y + dy;
            const nx = x + dx;
            if (ny >= 0 && ny < height && nx >= 0 && nx < width
                && grid[ny * width + nx]) hit = 1;
          }
        }
        next[y * width + x] = hit;
      }
    }
    grid = next;
  }
  return grid;
}

function rand(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 4294967296;
  };
}

describe("mask path", () => {
  it("separable dilation equals iterated 3x3 brute force", () => {
    const rng = rand(7);
    for (let trial = 0; trial < 20; trial++) {
      const width = 3 + Math.floor(rng() * 20);
      const height = 3 + Math.floor(rng() * 20);
      const mask = new Uint8Array(width * height);
      for (let i = 0; i < mask.length; i++) mask[i] = rng() < 0.15 ? 1 : 0;
      for (const k of [0, 1, 2, 3]) {
        const fast = dilate(mask, width, height, k);
        const slow = bruteDilate(mask, width, height, k);
        expect(Buffer.from(fast).equals(Buffer.from(slow))).toBe(true);
      }
    }
  });

  it("threshold is >= with non-finite treated as 0", () => {
    const prob = new Float32Array([0.4, 0.5, 0.6, NaN, Infinity]);
    expect(Array.from(threshold(prob, 0.5))).toEqual([0, 1, 1, 0, 0]);
  });

  it("overlay overrides survive dilation changes", () => {
    const width = 8;
    const height = 8;
    const prob = new Float32Array(width * height).fill(0.9);
    const overlay = new Uint8Array(width * height);
    overlay[10] = FORCE_OFF;
    overlay[20] = FORCE_ON;
    for (const k of [0, 1, 3]) {
      const mask = applyOverlay(dilate(threshold(prob, 0.5), width, height, k),
                                overlay);
      expect(mask[10]).toBe(0);
      expect(mask[20]).toBe(1);
    }
  });

  it("pencil line is 4-connected and endpoint-inclusive", () => {
    const pts = pencilLine(0, 0, 4, 3);
    expect(pts[0]).toEqual([0, 0]);
    expect(pts[pts.length - 1]).toEqual([4, 3]);
    for (let i = 1; i < pts.length; i++) {
      const dist = Math.abs(pts[i][0] - pts[i - 1][0])
        + Math.abs(pts[i][1] - pts[i - 1][1]);
      expect(dist).toBe(1);
    }
  });
});

describe("wire formats", () => {
  it("decodes an uncompressed frame", async () => {
    const width = 2;
    const height = 2;
    const payload = new ArrayBuffer(16 + 32);
    const view = new DataView(payload);
    [0x54, 0x53, 0x45, 0x47, 1, 0, 0, 0].forEach((b, i) => view.setUint8(i, b));
    view.setUint32(8, width, true);
    view.setUint32(12, height, true);
    [1, 2, 3, 4, 0.5, 0.25, 0, 1].forEach((v, i) =>
      view.setFloat32(16 + i * 4, v, true));
    const frame = await decodeFrame(payload);
    expect(Array.from(frame.image)).toEqual([1, 2, 3, 4]);
    expect(Array.from(frame.prob)).toEqual([0.5, 0.25, 0, 1]);
  });

  it("decodes a deflate-compressed frame via DecompressionStream", async () => {
    const raw = new Uint8Array(2 * 3 * 2 * 4);
    const rawView = new DataView(raw.buffer);
    for (let i = 0; i < 12; i++) rawView.setFloat32(i * 4, i * 0.125, true);
    const packed = deflateSync(raw);
    const frame = new Uint8Array(16 + packed.length);
    frame.set([0x54, 0x53, 0x45, 0x47, 1, 1, 0, 0]);
    const view = new DataView(frame.buffer);
    view.setUint32(8, 3, true);
    view.setUint32(12, 2, true);
    frame.set(packed, 16);
    const decoded = await decodeFrame(frame.buffer);
    expect(decoded.width).toBe(3);
    expect(decoded.image[1]).toBeCloseTo(0.125, 10);
  });

  it("rejects bad magic and wrong payload length", async () => {
    await expect(decodeFrame(new ArrayBuffer(8))).rejects.toThrow("header");
    const bad = new Uint8Array(16);
    bad.set([0x58, 0x53, 0x45, 0x47, 1, 0, 0, 0]);
    await expect(decodeFrame(bad.buffer)).rejects.toThrow("magic");
  });

  it("NPY round trip", () => {
    const data = new Float32Array([1.5, -2.25, 3, 4, 5.5, -0.125]);
    const parsed = parseNpy(serializeNpy(data, 3, 2).buffer as ArrayBuffer);
    expect(parsed.width).toBe(3);
    expect(parsed.height).toBe(2);
    expect(Array.from(parsed.data)).toEqual(Array.from(data));
  });

  it("RLE round trip skips neutral runs", () => {
    const overlay = new Uint8Array(20);
    overlay.fill(FORCE_ON, 3, 7);
    overlay.fill(FORCE_OFF, 12, 13);
    const runs = encodeOverlayRle(overlay);
    expect(runs).toEqual([[3, 4, FORCE_ON], [12, 1, FORCE_OFF]]);
    expect(Buffer.from(decodeOverlayRle(runs, 5, 4)).equals(Buffer.from(overlay)))
      .toBe(true);
  });
});

describe("numerics", () => {
  it("treeSum pairs like the reference", () => {
    expect(treeSum(new Float64Array([1, 2, 3]))).toBe((1 + 2) + (3 + 0));
    expect(treeSum(new Float64Array([]))).toBe(0);
  });

  it("medianSorted", () => {
    expect(medianSorted(new Float64Array([1, 3]))).toBe(2);
    expect(medianSorted(new Float64Array([1, 2, 8]))).toBe(2);
  });

  it("portableLog close to Math.log and exact at 1", () => {
    expect(portableLog(1)).toBe(0);
    for (const x of [1.0000001, 2, Math.E, 500.123, 1001]) {
      expect(portableLog(x)).toBeCloseTo(Math.log(x), 12);
    }
    expect(() => portableLog(0)).toThrow();
  });
});
