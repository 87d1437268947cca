/**
 * Client-side display pipeline, conformant to the server core.
 *
 * Stage chain (image path): raw clip -> sigma clamp -> limits
 * (zscale | minmax | manual) -> curve -> 8-bit quantize. Each stage is
 * buffered and a parameter change recomputes only that stage and later
 * ones, mirroring the server's invalidation semantics. Output bytes must
 * equal the server's golden vectors exactly.
 */

import {
  LN_1001,
  lowerBound,
  medianSorted,
  portableLog,
  treeSum,
  upperBound,
} from "./numerics.js";

export type Curve = "linear" | "log" | "sqrt";
export type LimitsMode = "zscale" | "minmax" | "manual";

export interface ScaleLimits {
  z1: number;
  z2: number;
  source: LimitsMode;
}

export interface ZScaleParams {
  nSamples: number;
  contrast: number;
  krej: number;
  maxRejectFraction: number;
  maxIterations: number;
  minPixels: number;
}

export const ZSCALE_DEFAULTS: ZScaleParams = {
  nSamples: 1000,
  contrast: 0.25,
  krej: 2.5,
  maxRejectFraction: 0.5,
  maxIterations: 5,
  minPixels: 5,
};

export const SIGMA_CLIP_ITERS = 5;
const LOG_CURVE_A = 1000.0;

export interface DisplayParams {
  rawClip: [number, number] | null;
  sigmaK: number;
  limitsMode: LimitsMode;
  manualLimits: [number, number] | null;
  curve: Curve;
}

export const DEFAULT_DISPLAY_PARAMS: DisplayParams = {
  rawClip: null,
  sigmaK: 3.0,
  limitsMode: "zscale",
  manualLimits: null,
  curve: "linear",
};

function finiteSortedF64(raster: Float32Array): Float64Array {
  let count = 0;
  for (let i = 0; i < raster.length; i++) {
    if (Number.isFinite(raster[i])) count++;
  }
  const out = new Float64Array(count);
  let j = 0;
  for (let i = 0; i < raster.length; i++) {
    const v = raster[i];
    if (Number.isFinite(v)) out[j++] = v;
  }
  out.sort();
  return out;
}

export function sigmaClipBounds(
  raster: Float32Array,
  k: number,
  maxIters = SIGMA_CLIP_ITERS,
): { lo: number; hi: number } | null {
  const s = finiteSortedF64(raster);
  if (s.length === 0) return null;
  let loIdx = 0;
  let hiIdx = s.length;
  let lo = s[0];
  let hi = s[0];
  for (let iter = 0; iter < maxIters; iter++) {
    const window = s.subarray(loIdx, hiIdx);
    const n = window.length;
    const center = medianSorted(window);
    const mean = treeSum(window) / n;
    const dev = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      const d = window[i] - mean;
      dev[i] = d * d;
    }
    const sd = Math.sqrt(treeSum(dev) / n);
    lo = center - k * sd;
    hi = center + k * sd;
    const newLo = Math.max(lowerBound(s, lo), loIdx);
    const newHi = Math.min(upperBound(s, hi), hiIdx);
    if (newLo >= newHi) break;
    if (newLo === loIdx && newHi === hiIdx) break;
    loIdx = newLo;
    hiIdx = newHi;
  }
  return { lo, hi };
}

/** Clamp finite values into float32-rounded bounds; NaN passes through. */
export function clampRaster(
  raster: Float32Array,
  lo: number,
  hi: number,
): Float32Array {
  const lo32 = Math.fround(lo);
  const hi32 = Math.fround(hi);
  const out = new Float32Array(raster.length);
  for (let i = 0; i < raster.length; i++) {
    out[i] = Math.min(Math.max(raster[i], lo32), hi32);
  }
  return out;
}

export function minmaxLimits(raster: Float32Array): ScaleLimits {
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < raster.length; i++) {
    const v = raster[i];
    if (Number.isFinite(v)) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!Number.isFinite(lo)) throw new Error("no finite pixel for min/max");
  return { z1: lo, z2: hi, source: "minmax" };
}

/** Up to nSamples pixels on a uniform stride over the flattened raster. */
function sampleGrid(raster: Float32Array, nSamples: number): Float64Array {
  const total = raster.length;
  const stride = Math.max(1, Math.floor(total / nSamples));
  const picked: number[] = [];
  for (let i = 0; i * stride < total && picked.length < nSamples; i++) {
    const v = raster[i * stride];
    if (Number.isFinite(v)) picked.push(v);
  }
  const out = new Float64Array(picked.length);
  out.set(picked);
  out.sort();
  return out;
}

function lstsq(
  s: Float64Array,
  alive: Uint8Array,
): { ok: boolean; slope: number; intercept: number } {
  const n = s.length;
  let count = 0;
  for (let i = 0; i < n; i++) if (alive[i]) count++;
  if (count < 2) return { ok: false, slope: 0, intercept: 0 };
  const xs = new Float64Array(count);
  const ys = new Float64Array(count);
  const xx = new Float64Array(count);
  const xy = new Float64Array(count);
  let j = 0;
  for (let i = 0; i < n; i++) {
    if (!alive[i]) continue;
    xs[j] = i;
    ys[j] = s[i];
    xx[j] = i * i;
    xy[j] = i * s[i];
    j++;
  }
  const sx = treeSum(xs);
  const sy = treeSum(ys);
  const sxx = treeSum(xx);
  const sxy = treeSum(xy);
  const delta = count * sxx - sx * sx;
  if (delta === 0.0) return { ok: false, slope: 0, intercept: 0 };
  return {
    ok: true,
    slope: (count * sxy - sx * sy) / delta,
    intercept: (sxx * sy - sx * sxy) / delta,
  };
}

function fitLineRejecting(
  s: Float64Array,
  p: ZScaleParams,
): { survived: boolean; slope: number } {
  const n = s.length;
  const alive = new Uint8Array(n).fill(1);
  const minKeep = Math.max(p.minPixels, p.maxRejectFraction * n);

  const aliveCount = () => {
    let c = 0;
    for (let i = 0; i < n; i++) if (alive[i]) c++;
    return c;
  };

  for (let iter = 0; iter < p.maxIterations; iter++) {
    const fit = lstsq(s, alive);
    if (!fit.ok) return { survived: false, slope: 0 };
    const resid = new Float64Array(n);
    for (let i = 0; i < n; i++) resid[i] = s[i] - (fit.slope * i + fit.intercept);
    const count = aliveCount();
    const sq = new Float64Array(count);
    let j = 0;
    for (let i = 0; i < n; i++) if (alive[i]) sq[j++] = resid[i] * resid[i];
    const rms = Math.sqrt(treeSum(sq) / count);
    const thresh = p.krej * rms;
    const newbad: number[] = [];
    for (let i = 0; i < n; i++) {
      if (alive[i] && Math.abs(resid[i]) > thresh) newbad.push(i);
    }
    if (newbad.length === 0) return { survived: true, slope: fit.slope };
    for (const i of newbad) {
      alive[i] = 0;
      if (i > 0) alive[i - 1] = 0;
      if (i + 1 < n) alive[i + 1] = 0;
    }
    if (aliveCount() < minKeep) return { survived: false, slope: 0 };
  }
  const fit = lstsq(s, alive);
  return fit.ok ? { survived: true, slope: fit.slope } : { survived: false, slope: 0 };
}

export function zscaleLimits(
  raster: Float32Array,
  p: ZScaleParams = ZSCALE_DEFAULTS,
): ScaleLimits | null {
  const s = sampleGrid(raster, p.nSamples);
  const n = s.length;
  if (n < p.minPixels) return null;
  const zmin = s[0];
  const zmax = s[n - 1];
  const med = medianSorted(s);
  const mid = (n - 1.0) / 2.0;
  const { survived, slope } = fitLineRejecting(s, p);
  let z1: number;
  let z2: number;
  if (survived) {
    z1 = Math.max(zmin, med - (mid * slope) / p.contrast);
    z2 = Math.min(zmax, med + ((n - mid) * slope) / p.contrast);
    if (z1 > z2) {
      z1 = med;
      z2 = med;
    }
  } else {
    z1 = zmin;
    z2 = zmax;
  }
  return { z1, z2, source: "zscale" };
}

/** t = clamp((v - z1) / (z2 - z1), 0, 1); non-finite and degenerate -> 0. */
export function normalized(raster: Float32Array, limits: ScaleLimits): Float64Array {
  const out = new Float64Array(raster.length);
  const span = limits.z2 - limits.z1;
  for (let i = 0; i < raster.length; i++) {
    const v = raster[i];
    let t: number;
    if (span === 0) {
      t = 0.0;
    } else {
      t = (v - limits.z1) / span;
      t = Math.min(Math.max(t, 0.0), 1.0);
    }
    if (!Number.isFinite(v)) t = 0.0;
    out[i] = t;
  }
  return out;
}

export function curveValue(t: Float64Array, curve: Curve): Float64Array {
  if (curve === "linear") return t;
  const out = new Float64Array(t.length);
  if (curve === "sqrt") {
    for (let i = 0; i < t.length; i++) out[i] = Math.sqrt(t[i]);
  } else {
    for (let i = 0; i < t.length; i++) {
      out[i] = portableLog(1.0 + LOG_CURVE_A * t[i]) / LN_1001;
    }
  }
  return out;
}

export function quantizeU8(d: Float64Array): Uint8Array {
  const out = new Uint8Array(d.length);
  for (let i = 0; i < d.length; i++) out[i] = Math.floor(255.0 * d[i] + 0.5);
  return out;
}

function rawClip(raster: Float32Array, clip: [number, number] | null): Float32Array {
  if (clip === null) return raster;
  return clampRaster(raster, clip[0], clip[1]);
}

const IMAGE_STAGES = ["raw_clip", "sigma_clip", "auto_limits", "curve", "quantize"] as const;
export type ImageStage = (typeof IMAGE_STAGES)[number];

/**
 * Buffered image-path pipeline. setParam dirties the stage and everything
 * after it; render recomputes only dirty stages.
 */
export class DisplayPipeline {
  private params: DisplayParams = { ...DEFAULT_DISPLAY_PARAMS };
  private buffers: {
    rawClip?: Float32Array;
    clamped?: Float32Array;
    limits?: ScaleLimits;
    curve?: Float64Array;
    display?: Uint8Array;
  } = {};
  private dirtyFrom = 0;
  readonly recomputes: Record<ImageStage, number> = {
    raw_clip: 0, sigma_clip: 0, auto_limits: 0, curve: 0, quantize: 0,
  };

  constructor(private source: Float32Array) {}

  getParams(): DisplayParams {
    return { ...this.params };
  }

  setParams(next: Partial<DisplayParams>): void {
    const order: (keyof DisplayParams)[] = [
      "rawClip", "sigmaK", "limitsMode", "manualLimits", "curve",
    ];
    const stageIndex: Record<keyof DisplayParams, number> = {
      rawClip: 0, sigmaK: 1, limitsMode: 2, manualLimits: 2, curve: 3,
    };
    for (const key of order) {
      if (!(key in next)) continue;
      const value = next[key];
      if (JSON.stringify(value) === JSON.stringify(this.params[key])) continue;
      (this.params as unknown as Record<string, unknown>)[key] = value;
      this.dirtyFrom = Math.min(this.dirtyFrom, stageIndex[key]);
    }
  }

  /** Recompute stages from the first dirty one; returns display bytes. */
  render(): Uint8Array {
    if (this.dirtyFrom <= 0) {
      this.buffers.rawClip = rawClip(this.source, this.params.rawClip);
      this.recomputes.raw_clip++;
    }
    if (this.dirtyFrom <= 1) {
      const bounds = sigmaClipBounds(this.buffers.rawClip!, this.params.sigmaK);
      this.buffers.clamped = bounds === null
        ? this.buffers.rawClip
        : clampRaster(this.buffers.rawClip!, bounds.lo, bounds.hi);
      this.recomputes.sigma_clip++;
    }
    if (this.dirtyFrom <= 2) {
      this.buffers.limits = this.computeLimits(this.buffers.clamped!);
      this.recomputes.auto_limits++;
    }
    if (this.dirtyFrom <= 3) {
      this.buffers.curve = curveValue(
        normalized(this.buffers.clamped!, this.buffers.limits!), this.params.curve);
      this.recomputes.curve++;
    }
    if (this.dirtyFrom <= 4) {
      this.buffers.display = quantizeU8(this.buffers.curve!);
      this.recomputes.quantize++;
    }
    this.dirtyFrom = IMAGE_STAGES.length;
    return this.buffers.display!;
  }

  get limits(): ScaleLimits | undefined {
    return this.buffers.limits;
  }

  private computeLimits(clamped: Float32Array): ScaleLimits {
    if (this.params.limitsMode === "manual" && this.params.manualLimits) {
      const [z1, z2] = this.params.manualLimits;
      return { z1, z2, source: "manual" };
    }
    if (this.params.limitsMode === "minmax") {
      return minmaxLimits(clamped);
    }
    // tiny images fall back to min/max, same as the server pipeline
    return zscaleLimits(clamped) ?? minmaxLimits(clamped);
  }
}

/** One-shot convenience used by the worker and the conformance tests. */
export function renderDisplay(
  raster: Float32Array,
  params: DisplayParams,
): Uint8Array {
  const pipe = new DisplayPipeline(raster);
  pipe.setParams(params);
  return pipe.render();
}
