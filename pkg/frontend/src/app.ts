/**
 * The workbench: upload, overview + dual synchronized main windows,
 * thumbnail shortcuts, stretch controls, mask editing, probe readout,
 * download. All interactive raster work happens client-side on the frame
 * payload; the server is contacted only for upload and download.
 */

import { ApiError, ServiceClient, type RegionInfo } from "./api.js";
import { ClientEditState, type PencilMode } from "./editstate.js";
import { decodeFrame } from "./frame.js";
import { drawHistogram } from "./histogram.js";
import {
  DEFAULT_DISPLAY_PARAMS,
  type Curve,
  type DisplayParams,
  type LimitsMode,
  type ScaleLimits,
} from "./pipeline.js";
import { grayscaleRgba, makeSurface, maskRgba, paintSurface } from "./render.js";
import { SharedViewport, ViewportController } from "./viewport.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

/** One in-flight worker job per kind; latest parameters win. */
class WorkerGate<P> {
  private inFlight = false;
  private pending: P | null = null;
  private job = 0;

  constructor(private send: (params: P, job: number) => void) {}

  request(params: P): number {
    if (this.inFlight) {
      this.pending = params;
      return -1;
    }
    this.inFlight = true;
    this.job++;
    this.send(params, this.job);
    return this.job;
  }

  done(): void {
    this.inFlight = false;
    if (this.pending !== null) {
      const next = this.pending;
      this.pending = null;
      this.request(next);
    }
  }
}

class Workbench {
  private api = new ServiceClient("");
  private worker: Worker;
  private key = "";
  private width = 0;
  private height = 0;
  private image: Float32Array | null = null;
  private prob: Float32Array | null = null;
  private objects: RegionInfo[] = [];
  private edit: ClientEditState | null = null;
  private displayParams: DisplayParams = { ...DEFAULT_DISPLAY_PARAMS };
  private displayBytes: Uint8Array | null = null;
  private maskBytes: Uint8Array | null = null;
  private limits: ScaleLimits | null = null;

  private viewport: SharedViewport | null = null;
  private redrawQueued = false;
  private pencilMode: PencilMode = "off";
  private pencilLast: { x: number; y: number } | null = null;

  private surfaces: ReturnType<typeof makeSurface>[] = [];
  private displayGate: WorkerGate<DisplayParams>;
  private maskGate: WorkerGate<{ threshold: number; dilation: number; overlay: Uint8Array }>;

  constructor() {
    this.worker = new Worker(new URL("./worker.js", import.meta.url),
                             { type: "module" });
    this.worker.onmessage = (ev) => this.onWorkerMessage(ev.data);
    this.displayGate = new WorkerGate((params, job) =>
      this.worker.postMessage({ kind: "display", job, params }));
    this.maskGate = new WorkerGate(({ threshold, dilation, overlay }, job) => {
      const buf = overlay.slice().buffer;
      this.worker.postMessage(
        { kind: "mask", job, threshold, dilation, overlay: buf }, [buf]);
    });
    this.bindControls();
  }

  // --- upload / open ------------------------------------------------------

  private bindControls(): void {
    el<HTMLInputElement>("file-input").addEventListener("change", (ev) => {
      const input = ev.target as HTMLInputElement;
      const file = input.files?.[0];
      if (file) void this.openFile(file);
    });

    el<HTMLSelectElement>("curve-select").addEventListener("change", (ev) => {
      this.setDisplayParams({ curve: (ev.target as HTMLSelectElement).value as Curve });
    });
    el<HTMLSelectElement>("limits-select").addEventListener("change", (ev) => {
      const mode = (ev.target as HTMLSelectElement).value as LimitsMode;
      el("manual-limits").classList.toggle("hidden", mode !== "manual");
      if (mode !== "manual") this.setDisplayParams({ limitsMode: mode });
      else this.applyManualLimits();
    });
    const manualApply = () => this.applyManualLimits();
    el<HTMLInputElement>("manual-min").addEventListener("change", manualApply);
    el<HTMLInputElement>("manual-max").addEventListener("change", manualApply);

    el<HTMLInputElement>("threshold-slider").addEventListener("input", (ev) => {
      const t = parseFloat((ev.target as HTMLInputElement).value);
      el("threshold-value").textContent = t.toFixed(2);
      if (this.edit) {
        this.edit.setThreshold(t);
        this.requestMask();
      }
    });
    el<HTMLInputElement>("dilation-stepper").addEventListener("change", (ev) => {
      const k = Math.max(0, parseInt((ev.target as HTMLInputElement).value, 10) || 0);
      if (this.edit) {
        this.edit.setDilation(k);
        this.requestMask();
      }
    });
    for (const mode of ["add", "delete", "off"] as const) {
      el(`pencil-${mode}`).addEventListener("click", () => {
        this.pencilMode = mode;
        for (const other of ["add", "delete", "off"]) {
          el(`pencil-${other}`).classList.toggle("active", other === mode);
        }
      });
    }
    el("download-btn").addEventListener("click", () => void this.downloadResult());
  }

  private async openFile(file: File): Promise<void> {
    this.banner("");
    try {
      const clientUuid = this.api.newClientUuid();
      const result = await this.api.upload(file, file.name, clientUuid);
      this.key = result.key;
      this.objects = result.objects;
      const frame = await decodeFrame(await this.api.fetchFrame(this.key));
      this.width = frame.width;
      this.height = frame.height;
      this.image = frame.image;
      this.prob = frame.prob;
      this.edit = new ClientEditState(frame.width, frame.height);
      this.displayParams = { ...DEFAULT_DISPLAY_PARAMS };
      this.limits = null;
      this.setupViews();
      this.worker.postMessage({
        kind: "init",
        width: frame.width,
        height: frame.height,
        image: frame.image.slice().buffer,
        prob: frame.prob.slice().buffer,
      });
      this.requestDisplay();
      this.requestMask();
      this.renderThumbnails();
      el("workbench").classList.remove("hidden");
    } catch (err) {
      this.banner(err instanceof ApiError
        ? `upload failed (${err.status} ${err.code}): ${err.message}`
        : `upload failed: ${err}`);
    }
  }

  // --- views ---------------------------------------------------------------

  private setupViews(): void {
    const imageCanvas = el<HTMLCanvasElement>("image-canvas");
    const maskCanvas = el<HTMLCanvasElement>("mask-canvas");
    const overviewCanvas = el<HTMLCanvasElement>("overview-canvas");
    this.viewport = new SharedViewport(this.width, this.height,
                                       imageCanvas.width, imageCanvas.height);
    this.surfaces = [
      makeSurface(imageCanvas, this.width, this.height),
      makeSurface(maskCanvas, this.width, this.height),
    ];
    const redraw = () => this.queueRedraw();
    // both main windows share the one viewport object: panning or zooming
    // in either mutates the same transform
    new ViewportController(imageCanvas, this.viewport, redraw);
    new ViewportController(maskCanvas, this.viewport, redraw, {
      onDrag: (sx, sy) => this.pencilDown(sx, sy),
    });
    maskCanvas.addEventListener("pointermove", (ev) => {
      const rect = maskCanvas.getBoundingClientRect();
      this.pencilMove(ev.clientX - rect.left, ev.clientY - rect.top,
                      ev.buttons === 1);
    });
    maskCanvas.addEventListener("pointerup", () => { this.pencilLast = null; });
    overviewCanvas.addEventListener("click", (ev) => {
      const rect = overviewCanvas.getBoundingClientRect();
      const scale = Math.min(overviewCanvas.width / this.width,
                             overviewCanvas.height / this.height);
      const x = (ev.clientX - rect.left) / scale;
      const y = (ev.clientY - rect.top) / scale;
      this.viewport?.centerOn(x, y);
      this.queueRedraw();
    });
    for (const canvas of [imageCanvas, maskCanvas]) {
      canvas.addEventListener("pointermove", (ev) => {
        const rect = canvas.getBoundingClientRect();
        this.updateProbe(ev.clientX - rect.left, ev.clientY - rect.top);
      });
    }
  }

  private queueRedraw(): void {
    if (this.redrawQueued) return;
    this.redrawQueued = true;
    requestAnimationFrame(() => {
      this.redrawQueued = false;
      this.redraw();
    });
  }

  /** Both canvases draw from the one shared transform, same frame. */
  private redraw(): void {
    if (!this.viewport || !this.displayBytes || !this.maskBytes || !this.edit) return;
    const transform = this.viewport.transform();
    paintSurface(this.surfaces[0], grayscaleRgba(this.displayBytes), transform);
    paintSurface(this.surfaces[1],
                 maskRgba(this.displayBytes, this.maskBytes, this.edit.overlay),
                 transform);
    this.drawOverview();
  }

  private drawOverview(): void {
    if (!this.displayBytes || !this.viewport) return;
    const canvas = el<HTMLCanvasElement>("overview-canvas");
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const scale = Math.min(canvas.width / this.width, canvas.height / this.height);
    ctx.fillStyle = "#101014";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.imageSmoothingEnabled = false;
    ctx.save();
    ctx.scale(scale, scale);
    ctx.drawImage(this.surfaces[0].backing, 0, 0);
    ctx.restore();
    // current field of view
    const t = this.viewport.transform();
    const x0 = (0 - t.offsetX) / t.scale;
    const y0 = (0 - t.offsetY) / t.scale;
    const w = this.viewport.viewWidth / t.scale;
    const h = this.viewport.viewHeight / t.scale;
    ctx.strokeStyle = "#ffd600";
    ctx.lineWidth = 1.5;
    ctx.strokeRect(x0 * scale, y0 * scale, w * scale, h * scale);
  }

  private renderThumbnails(): void {
    const strip = el("thumb-strip");
    strip.textContent = "";
    const side = 64;
    for (const region of this.objects.slice(0, 50)) {
      const canvas = document.createElement("canvas");
      canvas.width = side;
      canvas.height = side;
      canvas.className = "thumb";
      canvas.title = `object ${region.label}: ${region.pixel_count} px`;
      const [cx, cy] = region.centroid;
      canvas.addEventListener("click", () => {
        // jump both windows to the object
        this.viewport?.centerOn(cx, cy, Math.max(this.viewport.zoom, 4));
        this.queueRedraw();
      });
      strip.appendChild(canvas);
    }
    this.paintThumbnails();
  }

  private paintThumbnails(): void {
    if (!this.displayBytes) return;
    const strip = el("thumb-strip");
    const side = 64;
    Array.from(strip.children).forEach((node, i) => {
      const region = this.objects[i];
      const canvas = node as HTMLCanvasElement;
      const ctx = canvas.getContext("2d");
      if (!ctx || !region) return;
      const [cx, cy] = region.centroid;
      let x0 = Math.floor(cx + 0.5) - side / 2;
      let y0 = Math.floor(cy + 0.5) - side / 2;
      x0 = Math.min(Math.max(x0, 0), Math.max(this.width - side, 0));
      y0 = Math.min(Math.max(y0, 0), Math.max(this.height - side, 0));
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(this.surfaces[0].backing, x0, y0, side, side,
                    0, 0, side, side);
    });
  }

  // --- display / mask recompute ---------------------------------------------

  private setDisplayParams(partial: Partial<DisplayParams>): void {
    this.displayParams = { ...this.displayParams, ...partial };
    this.requestDisplay();
  }

  private applyManualLimits(): void {
    const lo = parseFloat(el<HTMLInputElement>("manual-min").value);
    const hi = parseFloat(el<HTMLInputElement>("manual-max").value);
    if (!Number.isFinite(lo) || !Number.isFinite(hi) || lo > hi) {
      this.banner("manual limits rejected: min must be <= max");
      return; // keep previous limits
    }
    this.banner("");
    this.setDisplayParams({ limitsMode: "manual", manualLimits: [lo, hi] });
  }

  private requestDisplay(): void {
    if (!this.image) return;
    this.displayGate.request({ ...this.displayParams });
  }

  private requestMask(): void {
    if (!this.edit) return;
    this.maskGate.request({
      threshold: this.edit.threshold,
      dilation: this.edit.dilation,
      overlay: this.edit.overlay,
    });
  }

  private onWorkerMessage(msg: { kind: string; display?: ArrayBuffer;
                                 mask?: ArrayBuffer; limits?: ScaleLimits }): void {
    if (msg.kind === "display" && msg.display) {
      this.displayBytes = new Uint8Array(msg.display);
      this.limits = msg.limits ?? null;
      if (this.limits) {
        el("limits-readout").textContent =
          `z1 ${fmt(this.limits.z1)}  z2 ${fmt(this.limits.z2)} (${this.limits.source})`;
      }
      drawHistogram(el<HTMLCanvasElement>("hist-canvas"), this.displayBytes);
      this.displayGate.done();
      this.queueRedraw();
      this.paintThumbnails();
    } else if (msg.kind === "mask" && msg.mask) {
      this.maskBytes = new Uint8Array(msg.mask);
      this.maskGate.done();
      this.queueRedraw();
    }
  }

  // --- pencil ----------------------------------------------------------------

  private pencilDown(sx: number, sy: number): boolean {
    if (this.pencilMode === "off" || !this.viewport || !this.edit) return false;
    const { x, y } = this.viewport.screenToImage(sx, sy);
    const px = Math.floor(x);
    const py = Math.floor(y);
    this.edit.pencilAt(px, py, this.pencilMode);
    this.pencilLast = { x: px, y: py };
    this.requestMask();
    return true;
  }

  private pencilMove(sx: number, sy: number, buttonDown: boolean): void {
    if (!buttonDown || this.pencilMode === "off" || !this.pencilLast
        || !this.viewport || !this.edit) return;
    const { x, y } = this.viewport.screenToImage(sx, sy);
    const px = Math.floor(x);
    const py = Math.floor(y);
    if (px === this.pencilLast.x && py === this.pencilLast.y) return;
    this.edit.pencilStroke(this.pencilLast.x, this.pencilLast.y, px, py,
                           this.pencilMode);
    this.pencilLast = { x: px, y: py };
    this.requestMask();
  }

  // --- probe -----------------------------------------------------------------

  private updateProbe(sx: number, sy: number): void {
    if (!this.viewport || !this.image || !this.prob) return;
    const { x, y } = this.viewport.screenToImage(sx, sy);
    const px = Math.floor(x);
    const py = Math.floor(y);
    if (px < 0 || py < 0 || px >= this.width || py >= this.height) return;
    const raw = this.image[py * this.width + px];
    let p = this.prob[py * this.width + px];
    if (!Number.isFinite(raw)) p = 0;
    el("probe-readout").textContent =
      `(${px}, ${py})  value ${Number.isFinite(raw) ? fmt(raw) : "NaN"}  ` +
      `confidence ${p.toFixed(3)}`;
  }

  // --- download ----------------------------------------------------------------

  private async downloadResult(): Promise<void> {
    if (!this.edit || !this.key) return;
    try {
      await this.api.postMask(this.key, this.width, this.height,
                              this.edit.threshold, this.edit.dilation,
                              this.edit.runs());
      this.edit.dirty = false;
      const bytes = await this.api.download(this.key);
      const blob = new Blob([bytes], { type: "application/fits" });
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = "masked.fits";
      link.click();
      URL.revokeObjectURL(link.href);
    } catch (err) {
      if (err instanceof ApiError && err.status === 410) {
        this.banner("session expired: please re-open the file");
      } else if (err instanceof ApiError) {
        this.banner(`download failed (${err.status} ${err.code}): ${err.message}`);
      } else {
        // transient network failure: edits stay dirty, user can retry
        this.banner(`download failed, will retry on next click: ${err}`);
      }
    }
  }

  private banner(text: string): void {
    const node = el("banner");
    node.textContent = text;
    node.classList.toggle("hidden", text === "");
  }
}

function fmt(v: number): string {
  if (Math.abs(v) >= 1e5 || (v !== 0 && Math.abs(v) < 1e-3)) {
    return v.toExponential(3);
  }
  return v.toFixed(3);
}

export function mountWorkbench(): Workbench {
  return new Workbench();
}

if (typeof document !== "undefined" && document.getElementById("file-input")) {
  mountWorkbench();
}

// re-exported for tests and embedding
export { SharedViewport, ViewportController } from "./viewport.js";
