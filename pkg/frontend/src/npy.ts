/**
 * Minimal NPY v1.0 '<f4' reader/writer; used by the test harness to feed
 * the service and to load the golden-vector inputs.
 */

const MAGIC = [0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59]; // \x93NUMPY

export interface NpyArray {
  width: number;
  height: number;
  data: Float32Array;
}

export function parseNpy(buf: ArrayBuffer): NpyArray {
  const bytes = new Uint8Array(buf);
  for (let i = 0; i < MAGIC.length; i++) {
    if (bytes[i] !== MAGIC[i]) throw new Error("not an NPY stream");
  }
  const major = bytes[6];
  const view = new DataView(buf);
  let headerLen: number;
  let headerStart: number;
  if (major === 1) {
    headerLen = view.getUint16(8, true);
    headerStart = 10;
  } else if (major === 2) {
    headerLen = view.getUint32(8, true);
    headerStart = 12;
  } else {
    throw new Error(`unsupported NPY version ${major}`);
  }
  const header = new TextDecoder("latin1").decode(
    bytes.subarray(headerStart, headerStart + headerLen));
  const descr = /'descr':\s*'([^']+)'/.exec(header)?.[1];
  const fortran = /'fortran_order':\s*(True|False)/.exec(header)?.[1];
  const shape = /'shape':\s*\((\d+),\s*(\d+)\)/.exec(header);
  if (descr !== "<f4" && descr !== "<f8") throw new Error(`dtype ${descr} unsupported`);
  if (fortran !== "False") throw new Error("fortran order unsupported");
  if (!shape) throw new Error("shape is not 2-D");
  const height = parseInt(shape[1], 10);
  const width = parseInt(shape[2], 10);
  const count = width * height;
  const payload = new DataView(buf, headerStart + headerLen);
  const data = new Float32Array(count);
  if (descr === "<f4") {
    for (let i = 0; i < count; i++) data[i] = payload.getFloat32(i * 4, true);
  } else {
    for (let i = 0; i < count; i++) data[i] = Math.fround(payload.getFloat64(i * 8, true));
  }
  return { width, height, data };
}

export function serializeNpy(data: Float32Array, width: number, height: number): Uint8Array {
  let header = `{'descr': '<f4', 'fortran_order': False, 'shape': (${height}, ${width}), }`;
  const unpadded = 6 + 2 + 2 + header.length + 1;
  header = header + " ".repeat((64 - (unpadded % 64)) % 64) + "\n";
  const out = new Uint8Array(10 + header.length + data.length * 4);
  out.set(MAGIC, 0);
  out[6] = 1;
  out[7] = 0;
  const view = new DataView(out.buffer);
  view.setUint16(8, header.length, true);
  for (let i = 0; i < header.length; i++) out[10 + i] = header.charCodeAt(i);
  const base = 10 + header.length;
  for (let i = 0; i < data.length; i++) {
    view.setFloat32(base + i * 4, data[i], true);
  }
  return out;
}
