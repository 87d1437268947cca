/**
 * Raster worker: keeps the full-resolution pipeline off the UI thread.
 * The main thread sends at most one in-flight job and coalesces to the
 * latest parameters (see WorkerGate in app.ts).
 */

import { composeMask } from "./maskpath.js";
import { DisplayPipeline, type DisplayParams } from "./pipeline.js";

interface InitMsg {
  kind: "init";
  width: number;
  height: number;
  image: ArrayBuffer;
  prob: ArrayBuffer;
}

interface DisplayMsg {
  kind: "display";
  job: number;
  params: DisplayParams;
}

interface MaskMsg {
  kind: "mask";
  job: number;
  threshold: number;
  dilation: number;
  overlay: ArrayBuffer;
}

type InMsg = InitMsg | DisplayMsg | MaskMsg;

let pipeline: DisplayPipeline | null = null;
let prob: Float32Array | null = null;
let width = 0;
let height = 0;

self.onmessage = (ev: MessageEvent<InMsg>) => {
  const msg = ev.data;
  if (msg.kind === "init") {
    width = msg.width;
    height = msg.height;
    pipeline = new DisplayPipeline(new Float32Array(msg.image));
    prob = new Float32Array(msg.prob);
    return;
  }
  if (!pipeline || !prob) return;
  if (msg.kind === "display") {
    pipeline.setParams(msg.params);
    const display = pipeline.render();
    const limits = pipeline.limits;
    const buf = display.slice().buffer;
    (self as unknown as Worker).postMessage(
      { kind: "display", job: msg.job, display: buf, limits }, [buf]);
  } else {
    const mask = composeMask(prob, width, height, msg.threshold,
                             msg.dilation, new Uint8Array(msg.overlay));
    const buf = mask.buffer;
    (self as unknown as Worker).postMessage(
      { kind: "mask", job: msg.job, mask: buf }, [buf]);
  }
};
