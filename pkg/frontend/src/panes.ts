// Browser panes: three orthogonal slice views plus the 3D overlay view,
// arranged as a quad. Slice imagery comes from the server's PNG endpoint;
// overlays (contours, landmarks, threshold cloud) draw on top through the
// shared rasterizer so the same pixels are testable headlessly.

import { ContourSet, Polyline } from "./api.js";
import { LandmarkPicker } from "./landmarks.js";
import { renderThresholdOverlay } from "./overlay.js";
import { PixelBuffer } from "./raster.js";
import { SessionStore, SliceAxis } from "./state.js";
import { MeshJson } from "./api.js";

const LANDMARK_COLOR = { r: 240, g: 60, b: 60 };
const TEMPLATE_COLOR = { r: 80, g: 140, b: 240 };
const OBTURATOR_COLOR = { r: 90, g: 200, b: 120 };
const TUMOR_COLOR = { r: 200, g: 140, b: 90 };
const NEEDLE_COLOR = { r: 240, g: 80, b: 200 };

const AXIS_UV: Record<SliceAxis, [number, number]> = {
  axial: [0, 1],
  sagittal: [1, 2],
  coronal: [0, 2],
};

export class SlicePane {
  readonly canvas: HTMLCanvasElement;
  private image: HTMLImageElement | null = null;
  private contours: ContourSet | null = null;

  constructor(
    readonly store: SessionStore,
    readonly picker: LandmarkPicker,
    readonly axis: SliceAxis,
  ) {
    this.canvas = document.createElement("canvas");
    this.canvas.className = `pane slice-${axis}`;
    this.canvas.addEventListener("click", (ev) => void this.onClick(ev));
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.step(ev.deltaY > 0 ? 1 : -1);
    });
  }

  private dims(): [number, number] | null {
    const vol = this.store.state?.volume;
    if (!vol) return null;
    const [u, v] = AXIS_UV[this.axis];
    return [vol.dims[u], vol.dims[v]];
  }

  private step(d: number): void {
    const vol = this.store.state?.volume;
    if (!vol) return;
    const axisDim = { sagittal: 0, coronal: 1, axial: 2 }[this.axis];
    const max = vol.dims[axisDim] - 1;
    const cur = this.store.view.sliceIndex[this.axis];
    this.store.view.sliceIndex[this.axis] = Math.min(max, Math.max(0, cur + d));
    void this.reload();
  }

  private async onClick(ev: MouseEvent): Promise<void> {
    const dims = this.dims();
    if (!dims) return;
    const rect = this.canvas.getBoundingClientRect();
    const px = Math.floor(((ev.clientX - rect.left) / rect.width) * dims[0]);
    const py = Math.floor(((ev.clientY - rect.top) / rect.height) * dims[1]);
    const delta = await this.picker.pick(this.axis, px, py);
    if (delta === null) {
      this.canvas.classList.add("pick-rejected"); // outside bounds: visual cue only
      setTimeout(() => this.canvas.classList.remove("pick-rejected"), 300);
      return;
    }
    await this.reload();
  }

  async reload(): Promise<void> {
    const state = this.store.state;
    if (!state?.volume) return;
    const index = this.store.view.sliceIndex[this.axis];
    const url = this.store.client.sliceUrl(
      state.id,
      this.axis,
      index,
      this.store.view.window,
      this.store.view.level,
    );
    this.image = await loadImage(url);
    if (state.pose) {
      this.contours = await this.store.client.contours(state.id, this.axis, index);
    } else {
      this.contours = null;
    }
    this.draw();
  }

  draw(): void {
    const dims = this.dims();
    if (!dims || !this.image) return;
    const scale = 3;
    this.canvas.width = dims[0] * scale;
    this.canvas.height = dims[1] * scale;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(this.image, 0, 0, this.canvas.width, this.canvas.height);

    const buf = new PixelBuffer(this.canvas.width, this.canvas.height);
    const toPixel = this.worldToPixel(dims, scale);
    if (this.contours) {
      const o = this.store.view.overlays;
      if (o.template) drawPolys(buf, this.contours.template, toPixel, TEMPLATE_COLOR);
      if (o.obturator) drawPolys(buf, this.contours.obturator, toPixel, OBTURATOR_COLOR);
      if (o.tumor) drawPolys(buf, this.contours.tumor, toPixel, TUMOR_COLOR);
      if (o.needles && this.contours.needles) {
        for (const polys of Object.values(this.contours.needles)) {
          drawPolys(buf, polys, toPixel, NEEDLE_COLOR);
        }
      }
    }
    for (const marker of this.picker.markers(this.axis)) {
      buf.circle(marker.u * scale, marker.v * scale, 4, LANDMARK_COLOR);
    }
    blit(ctx, buf);
  }

  // contours arrive as in-plane world mm; map through origin/spacing
  private worldToPixel(
    dims: [number, number],
    scale: number,
  ): (u: number, v: number) => [number, number] {
    const vol = this.store.state?.volume;
    const [uAxis, vAxis] = AXIS_UV[this.axis];
    if (!vol) return (u, v) => [u, v];
    return (u, v) => [
      ((u - vol.origin_mm[uAxis]) / vol.spacing_mm[uAxis]) * scale,
      ((v - vol.origin_mm[vAxis]) / vol.spacing_mm[vAxis]) * scale,
    ];
  }
}

export class ThreeDPane {
  readonly canvas: HTMLCanvasElement;
  private templateMesh: MeshJson | null = null;

  constructor(readonly store: SessionStore) {
    this.canvas = document.createElement("canvas");
    this.canvas.className = "pane view-3d";
    this.canvas.width = 480;
    this.canvas.height = 480;
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const cam = this.store.view.camera;
      cam.zoom = Math.min(8, Math.max(0.2, cam.zoom * (ev.deltaY > 0 ? 0.9 : 1.1)));
      this.draw();
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      if (ev.buttons !== 1) return;
      const cam = this.store.view.camera;
      cam.azimuthDeg += ev.movementX * 0.5;
      cam.elevationDeg = Math.min(89, Math.max(-89, cam.elevationDeg + ev.movementY * 0.5));
      this.draw();
    });
  }

  async reload(): Promise<void> {
    const state = this.store.state;
    if (state?.pose) {
      this.templateMesh = await this.store.client.mesh(state.id, "template");
    }
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const buf = new PixelBuffer(this.canvas.width, this.canvas.height);
    renderThresholdOverlay(
      buf,
      this.store.view.overlays.template ? this.templateMesh : null,
      this.store.view.overlays.thresholdCloud ? this.store.thresholdPreview : [],
      this.store.view.camera,
    );
    blit(ctx, buf);
  }
}

function drawPolys(
  buf: PixelBuffer,
  polys: Polyline[] | undefined,
  toPixel: (u: number, v: number) => [number, number],
  color: { r: number; g: number; b: number },
): void {
  for (const poly of polys ?? []) {
    const pts = poly.points.map(([u, v]) => toPixel(u, v));
    buf.polyline(pts, poly.closed, color);
  }
}

function blit(ctx: CanvasRenderingContext2D, buf: PixelBuffer): void {
  // draw only non-transparent overlay pixels over the existing imagery
  const existing = ctx.getImageData(0, 0, buf.width, buf.height);
  for (let i = 0; i < buf.data.length; i += 4) {
    if (buf.data[i + 3] > 0 && (buf.data[i] || buf.data[i + 1] || buf.data[i + 2])) {
      existing.data[i] = buf.data[i];
      existing.data[i + 1] = buf.data[i + 1];
      existing.data[i + 2] = buf.data[i + 2];
      existing.data[i + 3] = 255;
    }
  }
  ctx.putImageData(existing, 0, 0);
}

function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`failed to load ${url}`));
    img.src = url;
  });
}
