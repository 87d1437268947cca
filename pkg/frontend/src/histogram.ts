/** Static histogram of the displayed byte raster for the scale panel. */

export function histogram256(display: Uint8Array): Uint32Array {
  const bins = new Uint32Array(256);
  for (let i = 0; i < display.length; i++) bins[display[i]]++;
  return bins;
}

export function drawHistogram(canvas: HTMLCanvasElement, display: Uint8Array): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const bins = histogram256(display);
  let peak = 1;
  for (let i = 0; i < 256; i++) if (bins[i] > peak) peak = bins[i];
  const { width, height } = canvas;
  ctx.fillStyle = "#15151a";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = "#7fb4ff";
  const logPeak = Math.log1p(peak);
  for (let i = 0; i < 256; i++) {
    const h = Math.round((Math.log1p(bins[i]) / logPeak) * (height - 2));
    const x = Math.floor((i / 256) * width);
    const barWidth = Math.max(1, Math.floor(width / 256));
    if (h > 0) ctx.fillRect(x, height - h, barWidth, h);
  }
}
