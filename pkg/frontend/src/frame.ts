/**
 * FrameV1 decoder: "TSEG", version 1, flags (bit0 deflate), dtype 0 (f32 LE),
 * u32 width/height, then image raster + probability raster.
 */

export interface Frame {
  width: number;
  height: number;
  image: Float32Array;
  prob: Float32Array;
}

const FLAG_DEFLATE = 0x01;

async function inflate(payload: Uint8Array): Promise<Uint8Array<ArrayBufferLike>> {
  const stream = new Blob([payload as BlobPart]).stream()
    .pipeThrough(new DecompressionStream("deflate"));
  const buf = await new Response(stream).arrayBuffer();
  return new Uint8Array(buf);
}

export async function decodeFrame(buf: ArrayBuffer): Promise<Frame> {
  if (buf.byteLength < 16) throw new Error("frame shorter than header");
  const view = new DataView(buf);
  const magic = String.fromCharCode(
    view.getUint8(0), view.getUint8(1), view.getUint8(2), view.getUint8(3));
  if (magic !== "TSEG") throw new Error("bad frame magic");
  const version = view.getUint8(4);
  if (version !== 1) throw new Error(`unsupported frame version ${version}`);
  const flags = view.getUint8(5);
  const dtype = view.getUint8(6);
  if (dtype !== 0) throw new Error(`unsupported frame dtype ${dtype}`);
  const width = view.getUint32(8, true);
  const height = view.getUint32(12, true);

  let payload: Uint8Array<ArrayBufferLike> = new Uint8Array(buf, 16);
  if (flags & FLAG_DEFLATE) payload = await inflate(payload);
  const expected = 2 * width * height * 4;
  if (payload.length !== expected) {
    throw new Error(`frame payload is ${payload.length} bytes, want ${expected}`);
  }
  const count = width * height;
  // copy so the rasters are aligned and independent of the transfer buffer
  const image = new Float32Array(count);
  const prob = new Float32Array(count);
  const asFloats = new DataView(payload.buffer, payload.byteOffset, payload.length);
  for (let i = 0; i < count; i++) image[i] = asFloats.getFloat32(i * 4, true);
  for (let i = 0; i < count; i++) prob[i] = asFloats.getFloat32((count + i) * 4, true);
  return { width, height, image, prob };
}
