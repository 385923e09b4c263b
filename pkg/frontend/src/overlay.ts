// Threshold-cloud-over-model overlay: the visual agreement check after
// thresholding. Pure projection + rasterization so the browser pane and
// the golden-image test produce identical pixels.

import { MeshJson } from "./api.js";
import { CameraState } from "./state.js";
import { PixelBuffer, Rgba } from "./raster.js";

const MODEL_COLOR: Rgba = { r: 70, g: 130, b: 220 };
const CLOUD_COLOR: Rgba = { r: 250, g: 200, b: 40 };
const BACKGROUND: Rgba = { r: 12, g: 12, b: 16 };

export interface Projector {
  (p: [number, number, number]): [number, number];
}

export function makeProjector(
  camera: CameraState,
  width: number,
  height: number,
  scale: number,
): Projector {
  const az = (camera.azimuthDeg * Math.PI) / 180;
  const el = (camera.elevationDeg * Math.PI) / 180;
  const cosAz = Math.cos(az);
  const sinAz = Math.sin(az);
  const cosEl = Math.cos(el);
  const sinEl = Math.sin(el);
  const [tx, ty, tz] = camera.target;
  const s = scale * camera.zoom;
  return (p) => {
    const x = p[0] - tx;
    const y = p[1] - ty;
    const z = p[2] - tz;
    // yaw about z, then pitch toward the viewer; orthographic drop of depth
    const rx = cosAz * x + sinAz * y;
    const ry = -sinAz * x + cosAz * y;
    const u = rx;
    const v = cosEl * z - sinEl * ry;
    return [width / 2 + u * s, height / 2 - v * s];
  };
}

export function meshEdges(mesh: MeshJson): Array<[number, number]> {
  const seen = new Set<number>();
  const edges: Array<[number, number]> = [];
  const n = mesh.vertices.length;
  for (const [a, b, c] of mesh.triangles) {
    for (const [i, j] of [
      [a, b],
      [b, c],
      [c, a],
    ] as Array<[number, number]>) {
      const key = i < j ? i * n + j : j * n + i;
      if (!seen.has(key)) {
        seen.add(key);
        edges.push([i, j]);
      }
    }
  }
  return edges;
}

export function renderThresholdOverlay(
  buf: PixelBuffer,
  templateMesh: MeshJson | null,
  previewPoints: number[][],
  camera: CameraState,
  scale = 2.2,
): void {
  buf.fill(BACKGROUND);
  const project = makeProjector(camera, buf.width, buf.height, scale);
  if (templateMesh) {
    const projected = templateMesh.vertices.map((v) =>
      project(v as [number, number, number]),
    );
    for (const [i, j] of meshEdges(templateMesh)) {
      buf.line(projected[i][0], projected[i][1], projected[j][0], projected[j][1], MODEL_COLOR);
    }
  }
  for (const p of previewPoints) {
    const [x, y] = project(p as [number, number, number]);
    buf.disc(x, y, 1, CLOUD_COLOR);
  }
}
