/**
 * One shared view transform drives every canvas.
 *
 * The image window, the mask window and the overview all hold a reference
 * to the same SharedViewport instance; a gesture in any of them mutates
 * that single object, so the fields of view cannot diverge by construction.
 */

export const MIN_ZOOM = 1 / 16;
export const MAX_ZOOM = 64;

export class SharedViewport {
  centerX: number;
  centerY: number;
  zoom: number;

  constructor(
    readonly imageWidth: number,
    readonly imageHeight: number,
    public viewWidth: number,
    public viewHeight: number,
  ) {
    this.centerX = imageWidth / 2;
    this.centerY = imageHeight / 2;
    this.zoom = Math.min(viewWidth / imageWidth, viewHeight / imageHeight);
    this.zoom = clampZoom(this.zoom);
  }

  /** Canvas transform: screen = (world - center) * zoom + view/2. */
  transform(): { scale: number; offsetX: number; offsetY: number } {
    return {
      scale: this.zoom,
      offsetX: this.viewWidth / 2 - this.centerX * this.zoom,
      offsetY: this.viewHeight / 2 - this.centerY * this.zoom,
    };
  }

  screenToImage(sx: number, sy: number): { x: number; y: number } {
    const t = this.transform();
    return { x: (sx - t.offsetX) / t.scale, y: (sy - t.offsetY) / t.scale };
  }

  panByScreen(dx: number, dy: number): void {
    this.centerX -= dx / this.zoom;
    this.centerY -= dy / this.zoom;
  }

  /** Zoom so the image point under the cursor stays under the cursor. */
  zoomAt(sx: number, sy: number, factor: number): void {
    const anchor = this.screenToImage(sx, sy);
    this.zoom = clampZoom(this.zoom * factor);
    // solve center so that anchor maps back to (sx, sy)
    this.centerX = anchor.x - (sx - this.viewWidth / 2) / this.zoom;
    this.centerY = anchor.y - (sy - this.viewHeight / 2) / this.zoom;
  }

  centerOn(x: number, y: number, zoom?: number): void {
    this.centerX = x;
    this.centerY = y;
    if (zoom !== undefined) this.zoom = clampZoom(zoom);
  }
}

export function clampZoom(zoom: number): number {
  return Math.min(Math.max(zoom, MIN_ZOOM), MAX_ZOOM);
}

export type RedrawFn = () => void;

/**
 * Binds pointer/wheel gestures on a canvas to the shared viewport. Every
 * controller mutates the one viewport it was given and then asks the
 * workbench to redraw all windows in the same animation frame.
 */
export class ViewportController {
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(
    readonly element: HTMLElement,
    readonly viewport: SharedViewport,
    private requestRedraw: RedrawFn,
    private options: { onDrag?: (sx: number, sy: number) => boolean } = {},
  ) {
    element.addEventListener("pointerdown", this.onPointerDown);
    element.addEventListener("pointermove", this.onPointerMove);
    element.addEventListener("pointerup", this.onPointerUp);
    element.addEventListener("pointerleave", this.onPointerUp);
    element.addEventListener("wheel", this.onWheel, { passive: false });
  }

  private local(ev: PointerEvent | WheelEvent): { x: number; y: number } {
    const rect = this.element.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  private onPointerDown = (ev: PointerEvent) => {
    const { x, y } = this.local(ev);
    if (this.options.onDrag?.(x, y)) {
      // the pencil claimed this drag; don't pan
      this.dragging = false;
      return;
    }
    this.dragging = true;
    this.lastX = x;
    this.lastY = y;
  };

  private onPointerMove = (ev: PointerEvent) => {
    if (!this.dragging) return;
    const { x, y } = this.local(ev);
    this.viewport.panByScreen(x - this.lastX, y - this.lastY);
    this.lastX = x;
    this.lastY = y;
    this.requestRedraw();
  };

  private onPointerUp = () => {
    this.dragging = false;
  };

  private onWheel = (ev: WheelEvent) => {
    ev.preventDefault();
    const { x, y } = this.local(ev);
    const factor = Math.pow(2, -ev.deltaY / 240);
    this.viewport.zoomAt(x, y, factor);
    this.requestRedraw();
  };
}
