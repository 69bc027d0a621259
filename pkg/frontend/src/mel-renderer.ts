/**
 * Canvas mel heatmap with an F0 contour overlay and brush zoom.
 *
 * One offscreen pixel per (frame, channel) cell, scaled up by the GPU.
 * jsdom test environments have no 2D context; rendering then degrades to
 * updating the element's data attributes, which is what tests assert.
 */

import { Matrix } from './api.js';
import { buildLut, diffColor, melColor } from './colormap.js';

export interface ZoomRegion {
  frameStart: number;
  frameEnd: number;
}

export class MelRenderer {
  readonly canvas: HTMLCanvasElement;
  private lut: Uint8ClampedArray;
  private lastMel: Matrix | null = null;
  private lastF0: Float32Array | null = null;
  private zoom: ZoomRegion | null = null;

  constructor(
    parent: HTMLElement,
    options: { diverging?: boolean; width?: number; height?: number } = {},
  ) {
    this.canvas = document.createElement('canvas');
    this.canvas.width = options.width ?? 480;
    this.canvas.height = options.height ?? 160;
    this.canvas.className = options.diverging ? 'mel-canvas diff' : 'mel-canvas';
    parent.appendChild(this.canvas);
    this.lut = buildLut(options.diverging ? diffColor : melColor);
  }

  get zoomRegion(): ZoomRegion | null {
    return this.zoom;
  }

  setZoom(region: ZoomRegion | null): void {
    this.zoom = region;
    this.redraw();
  }

  draw(mel: Matrix, f0?: Float32Array | null): void {
    this.lastMel = mel;
    this.lastF0 = f0 ?? null;
    this.canvas.dataset.frames = String(mel.dims[0]);
    this.canvas.dataset.channels = String(mel.dims[1]);
    this.redraw();
  }

  private redraw(): void {
    if (!this.lastMel) return;
    const [frames, channels] = this.lastMel.dims;
    const start = this.zoom ? Math.max(0, this.zoom.frameStart) : 0;
    const end = this.zoom ? Math.min(frames, this.zoom.frameEnd) : frames;
    this.canvas.dataset.zoomStart = String(start);
    this.canvas.dataset.zoomEnd = String(end);

    const ctx = this.canvas.getContext('2d');
    if (!ctx) return; // headless test environment
    const values = this.lastMel.values;
    let lo = Infinity;
    let hi = -Infinity;
    for (let i = 0; i < values.length; i++) {
      if (values[i] < lo) lo = values[i];
      if (values[i] > hi) hi = values[i];
    }
    const range = hi - lo || 1;

    const visible = end - start;
    const image = ctx.createImageData(visible, channels);
    for (let f = 0; f < visible; f++) {
      for (let c = 0; c < channels; c++) {
        const v = values[(start + f) * channels + c];
        const idx = Math.min(255, Math.max(0, Math.round(((v - lo) / range) * 255)));
        // channel 0 at the bottom row
        const pixel = ((channels - 1 - c) * visible + f) * 4;
        image.data[pixel] = this.lut[idx * 3];
        image.data[pixel + 1] = this.lut[idx * 3 + 1];
        image.data[pixel + 2] = this.lut[idx * 3 + 2];
        image.data[pixel + 3] = 255;
      }
    }
    const off = document.createElement('canvas');
    off.width = visible;
    off.height = channels;
    const offCtx = off.getContext('2d');
    if (!offCtx) return;
    offCtx.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.drawImage(off, 0, 0, this.canvas.width, this.canvas.height);

    if (this.lastF0) this.drawContour(ctx, this.lastF0, start, end);
  }

  private drawContour(
    ctx: CanvasRenderingContext2D,
    f0: Float32Array,
    start: number,
    end: number,
  ): void {
    const visible = end - start;
    const maxHz = 1400;
    ctx.strokeStyle = '#00e5ff';
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let pen = false;
    for (let f = start; f < end; f++) {
      const hz = f0[f];
      if (!hz) {
        pen = false;
        continue;
      }
      const x = ((f - start) / Math.max(1, visible - 1)) * this.canvas.width;
      const y = this.canvas.height * (1 - Math.min(1, hz / maxHz));
      if (pen) ctx.lineTo(x, y);
      else ctx.moveTo(x, y);
      pen = true;
    }
    ctx.stroke();
  }
}
