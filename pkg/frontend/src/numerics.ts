/**
 * Deterministic float64 primitives mirroring the server pipeline.
 *
 * The server pins a pairwise reduction tree and an fdlibm-style log so
 * display bytes are reproducible bit for bit; this module replicates the
 * exact operation sequences. Do not "simplify" the arithmetic here: the
 * golden-vector suite compares output byte-for-byte.
 */

/** Pairwise sum over a power-of-two padding: out[i] = a[2i] + a[2i+1]. */
export function treeSum(values: Float64Array): number {
  const n = values.length;
  if (n === 0) return 0.0;
  let size = 1;
  while (size < n) size *= 2;
  let a = new Float64Array(size);
  a.set(values);
  while (a.length > 1) {
    const half = a.length >> 1;
    const next = new Float64Array(half);
    for (let i = 0; i < half; i++) next[i] = a[2 * i] + a[2 * i + 1];
    a = next;
  }
  return a[0];
}

/** Median of an ascending array; even length averages the two central. */
export function medianSorted(s: Float64Array): number {
  const n = s.length;
  if (n === 0) throw new Error("median of empty array");
  const mid = n >> 1;
  if (n % 2) return s[mid];
  return (s[mid - 1] + s[mid]) / 2.0;
}

const bitBuf = new DataView(new ArrayBuffer(8));

function f64FromBits(hi: number, lo: number): number {
  bitBuf.setUint32(0, hi);
  bitBuf.setUint32(4, lo);
  return bitBuf.getFloat64(0);
}

// fdlibm e_log coefficients, from their bit patterns
const LN2_HI = f64FromBits(0x3fe62e42, 0xfee00000);
const LN2_LO = f64FromBits(0x3dea39ef, 0x35793c76);
const LG1 = f64FromBits(0x3fe55555, 0x55555593);
const LG2 = f64FromBits(0x3fd99999, 0x9997fa04);
const LG3 = f64FromBits(0x3fd24924, 0x94229359);
const LG4 = f64FromBits(0x3fcc71c5, 0x1d8e78af);
const LG5 = f64FromBits(0x3fc74664, 0x96cb03de);
const LG6 = f64FromBits(0x3fc39a09, 0xd078c69f);
const LG7 = f64FromBits(0x3fc2f112, 0xdf3e5244);

/**
 * Natural log via the fdlibm algorithm; finite positive normal inputs only
 * (the display curve evaluates it on [1, 1001]).
 */
export function portableLog(x: number): number {
  bitBuf.setFloat64(0, x);
  let hx = bitBuf.getUint32(0) | 0;
  const lx = bitBuf.getUint32(4);
  if (!(x >= 2.2250738585072014e-308) || !Number.isFinite(x)) {
    throw new Error(`portableLog domain error: ${x}`);
  }
  let k = (hx >> 20) - 1023;
  hx &= 0x000fffff;
  const i = (hx + 0x95f64) & 0x100000;
  bitBuf.setUint32(0, (hx | (i ^ 0x3ff00000)) >>> 0);
  bitBuf.setUint32(4, lx);
  const xn = bitBuf.getFloat64(0);
  k += i >> 20;

  const f = xn - 1.0;
  const dk = k;
  if (((0x000fffff & (2 + hx)) | 0) < 3) {
    // |f| < 2**-20
    if (f === 0.0) {
      return k === 0 ? 0.0 : dk * LN2_HI + dk * LN2_LO;
    }
    const rt = f * f * (0.5 - 0.33333333333333333 * f);
    return k === 0 ? f - rt : dk * LN2_HI - ((rt - dk * LN2_LO) - f);
  }

  const s = f / (2.0 + f);
  const z = s * s;
  const w = z * z;
  const t1 = w * (LG2 + w * (LG4 + w * LG6));
  const t2 = z * (LG1 + w * (LG3 + w * (LG5 + w * LG7)));
  const r = t2 + t1;
  const ij = ((hx - 0x6147a) | (0x6b851 - hx)) | 0;
  if (ij > 0) {
    const hfsq = 0.5 * f * f;
    return k === 0
      ? f - (hfsq - s * (hfsq + r))
      : dk * LN2_HI - ((hfsq - (s * (hfsq + r) + dk * LN2_LO)) - f);
  }
  return k === 0
    ? f - s * (f - r)
    : dk * LN2_HI - ((s * (f - r) - dk * LN2_LO) - f);
}

export const LN_1001 = portableLog(1001.0);

/** First index with s[idx] >= value (numpy searchsorted side="left"). */
export function lowerBound(s: Float64Array, value: number): number {
  let lo = 0;
  let hi = s.length;
  while (lo < hi) {
    const mid = (lo + hi) >> 1;
    if (s[mid] < value) lo = mid + 1;
    else hi = mid;
  }
  return lo;
}

/** First index with s[idx] > value (numpy searchsorted side="right"). */
export function upperBound(s: Float64Array, value: number): number {
  let lo = 0;
  let hi = s.length;
  while (lo < hi) {
    const mid = (lo + hi) >> 1;
    if (s[mid] <= value) lo = mid + 1;
    else hi = mid;
  }
  return lo;
}
